#pragma once

#include <cstddef>
#include <vector>

namespace aslrkit {

// Digamma and trigamma for x > 0, absolute error below 1e-12. Computed by
// upward recurrence into the asymptotic (Bernoulli) series regime.
double digamma(double x);
double trigamma(double x);

// Thread-safe lgamma (std::lgamma touches the global signgam).
double log_gamma(double x);

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a),
// used for chi-square p-values: p = Q(k/2, x/2).
double gamma_q(double a, double x);
double chi_square_p_value(double statistic, unsigned dof);

// Gauss-Legendre nodes/weights on [-1, 1]; cached per order.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const QuadratureRule& gauss_legendre(std::size_t order);

} // namespace aslrkit
