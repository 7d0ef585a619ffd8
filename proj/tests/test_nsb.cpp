#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aslrkit/errors.hpp"
#include "aslrkit/estimators.hpp"
#include "aslrkit/special_functions.hpp"

using namespace aslrkit;

namespace {

NormalizedSeries from_counts(const std::vector<std::uint64_t>& counts) {
    NormalizedSeries s;
    s.alignment_bits = 12;
    std::uint64_t symbol = 0;
    for (std::uint64_t c : counts) {
        for (std::uint64_t i = 0; i < c; ++i) s.values.push_back(symbol);
        ++symbol;
    }
    return s;
}

// Independent Bayesian oracle: importance sampling over the same prior.
// Draw xi flat over (0, ln K), invert to beta by bisection, sample
// p ~ Dirichlet(beta) through gamma draws, weight by the multinomial
// likelihood of the observed counts, and average the plugin entropy of p.
// Uses none of the estimator's conditional-moment formulas.
double mc_posterior_entropy_bits(const std::vector<std::uint64_t>& counts, std::size_t k,
                                 std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double max_xi = std::log(static_cast<double>(k));

    auto beta_of_xi = [&](double xi) {
        double lo = 1e-12, hi = 1e12;
        for (int i = 0; i < 200; ++i) {
            const double mid = std::sqrt(lo * hi);
            const double val = digamma(k * mid + 1) - digamma(mid + 1);
            (val < xi ? lo : hi) = mid;
        }
        return std::sqrt(lo * hi);
    };

    double num = 0, den = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double beta = beta_of_xi(unif(rng) * max_xi);
        std::gamma_distribution<double> gamma(beta, 1.0);
        std::vector<double> p(k);
        double total = 0;
        for (auto& v : p) {
            v = gamma(rng);
            total += v;
        }
        double log_like = 0, entropy = 0;
        for (std::size_t i = 0; i < k; ++i) {
            p[i] /= total;
            if (i < counts.size() && counts[i] > 0) log_like += counts[i] * std::log(p[i]);
            if (p[i] > 0) entropy -= p[i] * std::log2(p[i]);
        }
        const double w = std::exp(log_like);
        num += w * entropy;
        den += w;
    }
    return num / den;
}

} // namespace

TEST_CASE("nsb matches an independent Monte-Carlo posterior on small cases") {
    struct Case {
        std::vector<std::uint64_t> counts;
        std::size_t k;
    } cases[] = {
        {{2, 1}, 4},
        {{1, 1, 1, 1}, 16},
        {{5}, 8},
        {{3, 2, 2, 1}, 8},
    };
    for (const auto& c : cases) {
        const auto series = from_counts(c.counts);
        const auto e = nsb_entropy(series, std::log2(static_cast<double>(c.k)));
        const double mc = mc_posterior_entropy_bits(c.counts, c.k, 400000, 99);
        INFO("counts size ", c.counts.size(), " K ", c.k, " nsb ", e.bits, " mc ", mc);
        CHECK(std::fabs(e.bits - mc) < 0.03);
    }
}

TEST_CASE("no coincidences leave the posterior wide open") {
    NormalizedSeries s;
    s.alignment_bits = 12;
    for (std::uint64_t i = 0; i < 200; ++i) s.values.push_back(i * 7919);
    const auto e = nsb_entropy(s, 35.0);
    CHECK(e.posterior_std_bits > 1.0);
}

TEST_CASE("well-sampled uniform alphabets pin the posterior tightly") {
    std::mt19937_64 rng(4);
    NormalizedSeries s;
    s.alignment_bits = 12;
    std::uniform_int_distribution<std::uint64_t> d(0, (1 << 10) - 1);
    for (int i = 0; i < 1'000'000; ++i) s.values.push_back(d(rng));
    const auto e = nsb_entropy(s, 10.0);
    CHECK(std::fabs(e.bits - 10.0) < 0.05);
    CHECK(e.posterior_std_bits < 0.01);
    const auto p = plugin_entropy(s);
    CHECK(std::fabs(e.bits - p.bits) < 0.05);
}

TEST_CASE("the alphabet must cover the observed support") {
    NormalizedSeries s;
    s.alignment_bits = 12;
    for (std::uint64_t i = 0; i < 100; ++i) s.values.push_back(i);
    CHECK_THROWS_AS(nsb_entropy(s, 6.0), AlphabetTooSmall); // 100 > 2^6
    CHECK_THROWS_AS(nsb_entropy(NormalizedSeries{}, 10.0), EmptySeries);
}

TEST_CASE("posterior mean respects the alphabet ceiling") {
    std::mt19937_64 rng(8);
    NormalizedSeries s;
    s.alignment_bits = 12;
    std::uniform_int_distribution<std::uint64_t> d(0, 255);
    for (int i = 0; i < 50000; ++i) s.values.push_back(d(rng));
    const auto e = nsb_entropy(s, 8.0);
    CHECK(e.bits <= e.alphabet_log2 + e.posterior_std_bits);
    CHECK(e.bits == doctest::Approx(8.0).epsilon(0.01));
}

TEST_CASE("estimate fields are internally consistent") {
    std::mt19937_64 rng(15);
    NormalizedSeries s;
    s.alignment_bits = 12;
    std::uniform_int_distribution<std::uint64_t> d(0, (1 << 14) - 1);
    for (int i = 0; i < 3000; ++i) s.values.push_back(d(rng));
    const auto e = nsb_entropy(s, 14.0);
    CHECK(e.method == EstimatorMethod::nsb);
    CHECK(e.n_samples == 3000);
    CHECK(e.bias_bound == doctest::Approx(std::exp2(e.bits / 2) / 3000.0));
    CHECK(e.low_confidence == (e.bias_bound > 0.05));
}
