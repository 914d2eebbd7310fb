#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace bilinear::fft {

// Smallest size >= n whose prime factors are 2, 3 and 5.
inline int good_size(int n) {
    for (int m = (n < 2 ? 2 : n);; ++m) {
        int r = m;
        for (int p : {2, 3, 5})
            while (r % p == 0) r /= p;
        if (r == 1 && m % 2 == 0) return m;
    }
}

namespace detail {

struct PlanPair {
    fftw_plan forward = nullptr;   // r2c
    fftw_plan backward = nullptr;  // c2r
    ~PlanPair() {
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }
};

// Planner calls are not thread safe in FFTW; execution on new arrays is.
// FFTW_ESTIMATE keeps the plan choice independent of timing, which keeps
// outputs bit-identical between runs.
inline const PlanPair& plans(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<PlanPair>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;
    auto pp = std::make_unique<PlanPair>();
    double* r = fftw_alloc_real(n);
    fftw_complex* c = fftw_alloc_complex(n / 2 + 1);
    pp->forward = fftw_plan_dft_r2c_1d(n, r, c, FFTW_ESTIMATE | FFTW_UNALIGNED);
    pp->backward = fftw_plan_dft_c2r_1d(n, c, r, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(r);
    fftw_free(c);
    return *cache.emplace(n, std::move(pp)).first->second;
}

}  // namespace detail

// Coefficients c_k = (1/n) sum_j u_j e^{-ik x_j}, k = 0..n/2, x_j = 2 pi j / n.
inline std::vector<std::complex<double>> forward(const std::vector<double>& u) {
    const int n = static_cast<int>(u.size());
    std::vector<double> in(u);
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_execute_dft_r2c(detail::plans(n).forward, in.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
    const double scale = 1.0 / n;
    for (auto& z : out) z *= scale;
    return out;
}

// Inverse of forward for a grid of size n; c holds k = 0..n/2.
inline std::vector<double> backward(const std::vector<std::complex<double>>& c, int n) {
    std::vector<std::complex<double>> in(n / 2 + 1, {0.0, 0.0});
    const std::size_t m = std::min(in.size(), c.size());
    for (std::size_t k = 0; k < m; ++k) in[k] = c[k];
    // the real transform ignores the imaginary part at k = 0 and k = n/2
    in[0] = {in[0].real(), 0.0};
    in[n / 2] = {in[n / 2].real(), 0.0};
    std::vector<double> out(n);
    fftw_execute_dft_c2r(detail::plans(n).backward, reinterpret_cast<fftw_complex*>(in.data()),
                         out.data());
    return out;
}

}  // namespace bilinear::fft
