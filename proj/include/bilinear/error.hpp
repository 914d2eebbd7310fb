#pragma once

#include <stdexcept>
#include <string>

namespace bilinear {

// Every failure the library reports derives from Error so the CLI can map
// categories to exit codes without string matching.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class AliasingBudgetExceeded : public NumericError {
public:
    AliasingBudgetExceeded(double fraction, double budget)
        : NumericError("aliasing budget exceeded: tail fraction " + std::to_string(fraction) +
                       " > " + std::to_string(budget)),
          fraction(fraction), budget(budget) {}
    double fraction;
    double budget;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

class ToleranceNotMet : public NumericError {
public:
    ToleranceNotMet(const std::string& what, double achieved)
        : NumericError(what + " (best achieved " + std::to_string(achieved) + ")"),
          achieved(achieved) {}
    double achieved;
};

class SignMismatch : public Error {
public:
    using Error::Error;
};

class CertificateFailed : public NumericError {
public:
    using NumericError::NumericError;
};

class IllConditioned : public NumericError {
public:
    IllConditioned(const std::string& what, double defect)
        : NumericError(what), defect(defect) {}
    double defect;
};

class HypothesisViolated : public Error {
public:
    using Error::Error;
};

class SingularGramian : public NumericError {
public:
    using NumericError::NumericError;
};

class NoContraction : public NumericError {
public:
    NoContraction(const std::string& what, int sweeps) : NumericError(what), sweeps(sweeps) {}
    int sweeps;
};

class RadiusNotReached : public NumericError {
public:
    RadiusNotReached(const std::string& what, double distance)
        : NumericError(what), distance(distance) {}
    double distance;
};

}  // namespace bilinear
