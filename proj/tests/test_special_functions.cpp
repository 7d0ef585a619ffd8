#include <doctest.h>

#include <cmath>

#include "aslrkit/special_functions.hpp"

using namespace aslrkit;

// Reference values computed with 30-digit arithmetic (mpmath).

TEST_CASE("digamma matches high-precision references") {
    const struct { double x, value; } cases[] = {
        {0.001, -1000.5755719318103005},
        {0.1, -10.423754940411076795},
        {0.5, -1.9635100260214234794},
        {1, -0.57721566490153286061},
        {1.5, 0.036489973978576520559},
        {2, 0.42278433509846713939},
        {3.25, 1.0169909110681790364},
        {10.25, 2.2777047906867239693},
        {12.0, 2.4426616799758120167},
        {100.5, 4.6051743525818452119},
        {1e4, 9.2102903711428494036},
        {1e8, 18.420680738952365464},
        {1e12, 27.631021115928048208},
        {3.7e15, 35.847109214560863885},
    };
    for (const auto& c : cases) {
        const double tol = std::max(1e-12, std::fabs(c.value) * 1e-14);
        CHECK(std::fabs(digamma(c.x) - c.value) < tol);
    }
    CHECK_THROWS(digamma(0.0));
    CHECK_THROWS(digamma(-1.0));
}

TEST_CASE("trigamma matches high-precision references") {
    const struct { double x, value; } cases[] = {
        {0.001, 1000001.642533195869},
        {0.1, 101.43329915079275882},
        {0.5, 4.9348022005446793094},
        {1, 1.6449340668482264365},
        {1.5, 0.93480220054467930942},
        {2, 0.64493406684822643647},
        {3.25, 0.35979829030957987507},
        {10.25, 0.1024745215179918668},
        {12.0, 0.08690187287176839075},
        {100.5, 0.0099999166695831027116},
        {1e4, 0.00010000500016666666633},
        {1e8, 1.0000000050000000167e-8},
        {1e12, 1.0000000000005e-12},
        {3.7e15, 2.7027027027027030679e-16},
    };
    for (const auto& c : cases) {
        const double tol = std::max(1e-12, std::fabs(c.value) * 1e-14);
        CHECK(std::fabs(trigamma(c.x) - c.value) < tol);
    }
}

TEST_CASE("digamma recurrence is self-consistent") {
    for (double x : {0.25, 0.7, 1.0, 3.9, 11.5, 200.0}) {
        CHECK(std::fabs(digamma(x + 1) - digamma(x) - 1.0 / x) < 1e-12);
        CHECK(std::fabs(trigamma(x + 1) - trigamma(x) + 1.0 / (x * x)) < 1e-12);
    }
}

TEST_CASE("regularized upper incomplete gamma matches references") {
    const struct { double a, x, q; } cases[] = {
        {0.5, 0.25, 0.47950012218695346232},
        {2, 3, 0.19914827347145577192},
        {49.5, 30.0, 0.99931999704984857623},
        {49.5, 49.5, 0.4810969124082638978},
        {49.5, 80.0, 0.00010115119648361802883},
        {49.5, 150.0, 4.2266534644196257207e-22},
        {5, 0.1, 0.99999992332198313811},
    };
    for (const auto& c : cases) {
        const double got = gamma_q(c.a, c.x);
        CHECK(std::fabs(got - c.q) < std::max(1e-13, c.q * 1e-10));
    }
    CHECK(gamma_q(3.0, 0.0) == 1.0);
}

TEST_CASE("chi-square p-values behave at the 99-dof scale used by histograms") {
    // Q(49.5, x/2) for the 100-bin uniformity test.
    CHECK(chi_square_p_value(60.0, 99) == doctest::Approx(gamma_q(49.5, 30.0)));
    CHECK(chi_square_p_value(99.0, 99) == doctest::Approx(gamma_q(49.5, 49.5)));
    CHECK(chi_square_p_value(300.0, 99) == doctest::Approx(gamma_q(49.5, 150.0)));
    CHECK(chi_square_p_value(99.0, 99) > 0.01);  // typical uniform data passes
    CHECK(chi_square_p_value(160.0, 99) < 0.01); // strong deviation fails
}

TEST_CASE("Gauss-Legendre rules integrate polynomials exactly") {
    for (std::size_t order : {8u, 16u, 64u, 128u}) {
        const auto& rule = gauss_legendre(order);
        double w_total = 0, x2 = 0, x8 = 0;
        for (std::size_t i = 0; i < order; ++i) {
            w_total += rule.weights[i];
            x2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
            x8 += rule.weights[i] * std::pow(rule.nodes[i], 8);
        }
        CHECK(w_total == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(x2 == doctest::Approx(2.0 / 3).epsilon(1e-12));
        CHECK(x8 == doctest::Approx(2.0 / 9).epsilon(1e-12));
    }
    // And a transcendental sanity check: integral of cos over [-1,1].
    const auto& rule = gauss_legendre(32);
    double acc = 0;
    for (std::size_t i = 0; i < 32; ++i) acc += rule.weights[i] * std::cos(rule.nodes[i]);
    CHECK(acc == doctest::Approx(2 * std::sin(1.0)).epsilon(1e-12));
}
