#pragma once

#include "bilinear/error.hpp"
#include "bilinear/fft.hpp"
#include "bilinear/trig_field.hpp"
#include "bilinear/trig_poly.hpp"
#include "bilinear/expression.hpp"
#include "bilinear/profiles.hpp"
#include "bilinear/schedule.hpp"
#include "bilinear/dynamics.hpp"
#include "bilinear/phase_tree.hpp"
#include "bilinear/saturation.hpp"
#include "bilinear/synthesis.hpp"
#include "bilinear/multiprecision.hpp"
#include "bilinear/quadrature.hpp"
#include "bilinear/moment.hpp"
#include "bilinear/local_exact.hpp"
