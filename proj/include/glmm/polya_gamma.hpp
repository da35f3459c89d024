#pragma once

#include "glmm/rng.hpp"

namespace glmm {

/// Exact draw from the Polya-Gamma PG(1, c) law using the alternating-series
/// rejection sampler (Devroye's method as specialized by Polson, Scott and
/// Windle). The result is strictly positive.
double draw_polya_gamma(double c, Engine& eng);

/// E[PG(1, c)] = tanh(c / 2) / (2 c), with the c -> 0 limit 1/4.
double polya_gamma_mean(double c);

}  // namespace glmm
