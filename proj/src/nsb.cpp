#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <vector>

#include "aslrkit/errors.hpp"
#include "aslrkit/estimators.hpp"
#include "aslrkit/special_functions.hpp"

namespace aslrkit {

// Nemenman-Shafee-Bialek estimator.
//
// A symmetric Dirichlet(beta) likelihood over K symbols pins the a-priori
// expected entropy at xi(beta) = psi(K*beta + 1) - psi(beta + 1); placing a
// flat prior on xi in (0, ln K) and integrating the Dirichlet posterior
// moments of the entropy over it gives a posterior mean that stays honest
// far into the under-sampled regime, plus a posterior standard deviation
// quantifying what the coincidence counts actually determined.
//
// Counts enter only through multiplicity classes (count value, number of
// symbols with that count), so one evaluation costs O(classes) regardless
// of the sample size.

namespace {

constexpr double kLn2 = 0.6931471805599453;

struct MultiplicityClasses {
    std::vector<double> count;  // distinct count values, >= 1
    std::vector<double> mult;   // symbols per count value
    double n = 0;               // total samples
    double k1 = 0;              // observed distinct symbols
};

struct ConditionalMoments {
    double log_evidence; // ln P(counts | beta), up to a counts-only constant
    double s_mean;       // E[S | counts, beta], nats
    double s_second;     // E[S^2 | counts, beta], nats^2
};

// xi(beta) in nats and its derivative, for inverting the prior map.
double xi_of_beta(double beta, double k) { return digamma(k * beta + 1.0) - digamma(beta + 1.0); }
double dxi_dbeta(double beta, double k) { return k * trigamma(k * beta + 1.0) - trigamma(beta + 1.0); }

double beta_of_xi(double xi, double k, double max_xi) {
    // Bracket in log(beta), then Newton. xi is monotone in beta.
    double lo = -60.0, hi = 60.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (xi_of_beta(std::exp(mid), k) < xi)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-3) break;
    }
    double beta = std::exp(0.5 * (lo + hi));
    for (int i = 0; i < 60; ++i) {
        double f = xi_of_beta(beta, k) - xi;
        double df = dxi_dbeta(beta, k);
        double step = f / df;
        double next = beta - step;
        if (!(next > 0)) next = beta / 2;
        if (std::fabs(next - beta) <= 1e-14 * beta) {
            beta = next;
            break;
        }
        beta = next;
    }
    (void)max_xi;
    return beta;
}

ConditionalMoments conditional_moments(const MultiplicityClasses& mc, double k, double beta) {
    const double n_hat = mc.n + k * beta;
    const double m0 = k - mc.k1; // unobserved symbols

    // ln P(counts | beta) = lnG(K b) - lnG(N + K b) + sum_i [lnG(c_i + b) - lnG(b)]
    double log_ev = log_gamma(k * beta) - log_gamma(n_hat);
    for (std::size_t i = 0; i < mc.count.size(); ++i)
        log_ev += mc.mult[i] * (log_gamma(mc.count[i] + beta) - log_gamma(beta));

    // First posterior moment: S_hat = sum_i w_i (psi(N^+1) - psi(n^_i+1)),
    // w_i = n^_i / N^.
    const double psi_n1 = digamma(n_hat + 1.0);
    double s_mean = 0.0;
    for (std::size_t i = 0; i < mc.count.size(); ++i) {
        const double nh = mc.count[i] + beta;
        s_mean += mc.mult[i] * nh * (psi_n1 - digamma(nh + 1.0));
    }
    if (m0 > 0 && beta > 0) s_mean += m0 * beta * (psi_n1 - digamma(beta + 1.0));
    s_mean /= n_hat;

    // Second posterior moment, split into the i != j and i == j sums:
    //   E[S^2] = [ (sum n^_i A_i)^2 - sum n^_i^2 A_i^2
    //              - psi1(N^+2) (N^^2 - sum n^_i^2)
    //              + sum n^_i (n^_i+1) J_i ] / (N^ (N^+1))
    // with A_i = psi(n^_i+1) - psi(N^+2)
    // and  J_i = (psi(n^_i+2) - psi(N^+2))^2 + psi1(n^_i+2) - psi1(N^+2).
    const double psi_n2 = digamma(n_hat + 2.0);
    const double psi1_n2 = trigamma(n_hat + 2.0);
    double sum_na = 0.0, sum_n2a2 = 0.0, sum_n2 = 0.0, sum_jj = 0.0;
    auto accumulate = [&](double nh, double m) {
        const double a = digamma(nh + 1.0) - psi_n2;
        const double j = (digamma(nh + 2.0) - psi_n2) * (digamma(nh + 2.0) - psi_n2) +
                         trigamma(nh + 2.0) - psi1_n2;
        sum_na += m * nh * a;
        sum_n2a2 += m * nh * nh * a * a;
        sum_n2 += m * nh * nh;
        sum_jj += m * nh * (nh + 1.0) * j;
    };
    for (std::size_t i = 0; i < mc.count.size(); ++i) accumulate(mc.count[i] + beta, mc.mult[i]);
    if (m0 > 0 && beta > 0) accumulate(beta, m0);
    const double cross = sum_na * sum_na - sum_n2a2 - psi1_n2 * (n_hat * n_hat - sum_n2);
    double s_second = (cross + sum_jj) / (n_hat * (n_hat + 1.0));

    return {log_ev, s_mean, s_second};
}

struct Integrals {
    double z = 0;
    double zs = 0;
    double zs2 = 0;
};

// Gauss-Legendre panel with the evidence rescaled by exp(-log_shift).
Integrals integrate_panel(const MultiplicityClasses& mc, double k, double lo, double hi,
                          std::size_t order, double log_shift) {
    const QuadratureRule& rule = gauss_legendre(order);
    Integrals acc;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    const double max_xi = std::log(k);
    for (std::size_t i = 0; i < order; ++i) {
        const double xi = mid + half * rule.nodes[i];
        const double beta = beta_of_xi(xi, k, max_xi);
        const ConditionalMoments m = conditional_moments(mc, k, beta);
        const double w = rule.weights[i] * half * std::exp(m.log_evidence - log_shift);
        if (w == 0.0) continue;
        acc.z += w;
        acc.zs += w * m.s_mean;
        acc.zs2 += w * m.s_second;
    }
    return acc;
}

} // namespace

EntropyEstimate nsb_entropy(const NormalizedSeries& series, double alphabet_size_log2) {
    if (series.values.empty()) throw EmptySeries("nsb_entropy on empty series");

    std::unordered_map<std::uint64_t, std::uint64_t> counts;
    counts.reserve(series.values.size());
    for (std::uint64_t v : series.values) ++counts[v];

    const double k = std::exp2(alphabet_size_log2);
    if (static_cast<double>(counts.size()) > k)
        throw AlphabetTooSmall("observed " + std::to_string(counts.size()) + " distinct values, alphabet holds " +
                               std::to_string(k));

    EntropyEstimate e;
    e.method = EstimatorMethod::nsb;
    e.n_samples = series.values.size();
    e.alphabet_log2 = alphabet_size_log2;

    // Degenerate alphabets carry no entropy.
    if (counts.size() == 1 && k < 2.0) {
        e.bias_bound = 1.0 / static_cast<double>(e.n_samples);
        return e;
    }

    MultiplicityClasses mc;
    {
        std::map<std::uint64_t, double> classes;
        for (const auto& [value, c] : counts) classes[c] += 1.0;
        for (const auto& [c, m] : classes) {
            mc.count.push_back(static_cast<double>(c));
            mc.mult.push_back(m);
        }
    }
    mc.n = static_cast<double>(series.values.size());
    mc.k1 = static_cast<double>(counts.size());

    const double max_xi = std::log(k);

    // Scan the evidence over xi to locate its peak, then lay adaptive
    // Gauss-Legendre panels that tighten around it.
    constexpr int kScan = 128;
    double peak_xi = max_xi / 2;
    double peak_log = -HUGE_VAL;
    std::vector<double> scan_log(kScan);
    for (int i = 0; i < kScan; ++i) {
        const double xi = max_xi * (i + 0.5) / kScan;
        const double beta = beta_of_xi(xi, k, max_xi);
        scan_log[i] = conditional_moments(mc, k, beta).log_evidence;
        if (scan_log[i] > peak_log) {
            peak_log = scan_log[i];
            peak_xi = xi;
        }
    }
    // Span where the evidence stays within ~8 nats of the peak.
    double lo_w = max_xi, hi_w = 0.0;
    for (int i = 0; i < kScan; ++i) {
        if (scan_log[i] < peak_log - 8.0) continue;
        const double xi = max_xi * (i + 0.5) / kScan;
        lo_w = std::min(lo_w, xi);
        hi_w = std::max(hi_w, xi);
    }
    const double width = std::max(hi_w - lo_w, max_xi / kScan);

    std::vector<double> cuts{0.0};
    for (double c : {peak_xi - 4 * width, peak_xi - width, peak_xi + width, peak_xi + 4 * width})
        if (c > 0.0 && c < max_xi) cuts.push_back(c);
    cuts.push_back(max_xi);
    std::sort(cuts.begin(), cuts.end());

    Integrals total;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        // Double the order until the panel's contribution stabilizes to
        // better than 1e-3 relative (the convergence contract).
        Integrals prev = integrate_panel(mc, k, cuts[p], cuts[p + 1], 16, peak_log);
        for (std::size_t order = 32; order <= 512; order *= 2) {
            Integrals cur = integrate_panel(mc, k, cuts[p], cuts[p + 1], order, peak_log);
            const double dz = std::fabs(cur.z - prev.z);
            const double ds = std::fabs(cur.zs - prev.zs);
            prev = cur;
            if (dz <= 1e-4 * std::max(cur.z, 1e-300) && ds <= 1e-4 * std::max(std::fabs(cur.zs), 1e-300))
                break;
        }
        total.z += prev.z;
        total.zs += prev.zs;
        total.zs2 += prev.zs2;
    }

    const double mean_nats = total.zs / total.z;
    const double second_nats = total.zs2 / total.z;
    const double var_nats = std::max(0.0, second_nats - mean_nats * mean_nats);

    e.bits = mean_nats / kLn2;
    e.posterior_std_bits = std::sqrt(var_nats) / kLn2;
    e.bias_bound = std::exp2(e.bits / 2.0) / mc.n;
    e.low_confidence = e.bias_bound > 0.05;
    return e;
}

} // namespace aslrkit
