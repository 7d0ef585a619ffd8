#include "aslrkit/special_functions.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace aslrkit {

namespace {

// Bernoulli coefficients B_2n / (2n) for the digamma asymptotic series and
// B_2n for the trigamma one.
constexpr double kDigammaCoef[] = {
    1.0 / 12, -1.0 / 120, 1.0 / 252, -1.0 / 240, 1.0 / 132, -691.0 / 32760, 1.0 / 12,
};
constexpr double kBernoulli[] = {
    1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730, 7.0 / 6,
};
constexpr double kAsymptoticThreshold = 12.0;

} // namespace

double digamma(double x) {
    if (!(x > 0)) throw std::domain_error("digamma requires x > 0");
    double result = 0.0;
    while (x < kAsymptoticThreshold) {
        result -= 1.0 / x;
        x += 1.0;
    }
    // psi(x) ~ ln x - 1/(2x) - sum B_2n / (2n x^2n)
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 0.0, power = inv2;
    for (double c : kDigammaCoef) {
        series += c * power;
        power *= inv2;
    }
    return result + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
    if (!(x > 0)) throw std::domain_error("trigamma requires x > 0");
    double result = 0.0;
    while (x < kAsymptoticThreshold) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    // psi1(x) ~ 1/x + 1/(2x^2) + sum B_2n / x^(2n+1)
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 0.0, power = inv * inv2;
    for (double c : kBernoulli) {
        series += c * power;
        power *= inv2;
    }
    return result + inv + 0.5 * inv2 + series;
}

double log_gamma(double x) {
    int sign = 0;
    return ::lgamma_r(x, &sign);
}

namespace {

// Lower incomplete gamma by series, x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 10000; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Upper incomplete gamma by Lentz continued fraction, x >= a + 1.
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 10000; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

} // namespace

double gamma_q(double a, double x) {
    if (!(a > 0) || x < 0) throw std::domain_error("gamma_q requires a > 0, x >= 0");
    if (x == 0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi_square_p_value(double statistic, unsigned dof) {
    if (statistic <= 0) return 1.0;
    return gamma_q(0.5 * dof, 0.5 * statistic);
}

const QuadratureRule& gauss_legendre(std::size_t order) {
    static std::mutex mutex;
    static std::map<std::size_t, QuadratureRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;

    QuadratureRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    // Newton iteration on P_n from the Chebyshev-angle initial guess.
    const std::size_t half = (order + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(order) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= order; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    return cache.emplace(order, std::move(rule)).first->second;
}

} // namespace aslrkit
