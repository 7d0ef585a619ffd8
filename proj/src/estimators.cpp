#include "aslrkit/estimators.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <unordered_map>

#include "aslrkit/errors.hpp"

namespace aslrkit {

namespace {

double bias_bound_for(double bits, std::size_t n) {
    return n == 0 ? 0.0 : std::exp2(bits / 2.0) / static_cast<double>(n);
}

void finalize(EntropyEstimate& e) {
    e.bias_bound = bias_bound_for(e.bits, e.n_samples);
    e.low_confidence = e.bias_bound > 0.05;
}

double empirical_entropy_bits(const std::unordered_map<std::uint64_t, std::uint64_t>& counts,
                              std::size_t n) {
    // H = log2 n - (sum c log2 c) / n, one log per distinct value.
    double acc = 0.0;
    for (const auto& [value, c] : counts) acc += static_cast<double>(c) * std::log2(static_cast<double>(c));
    double h = std::log2(static_cast<double>(n)) - acc / static_cast<double>(n);
    return h < 0 ? 0.0 : h;
}

} // namespace

const char* method_name(EstimatorMethod method) {
    switch (method) {
        case EstimatorMethod::nsb: return "nsb";
        case EstimatorMethod::plugin: return "plugin";
        case EstimatorMethod::byte_plugin: return "byte_plugin";
        case EstimatorMethod::bitmask_upper_bound: return "bitmask_upper_bound";
    }
    return "?";
}

Bitmask changing_bitmask(const NormalizedSeries& series, BitmaskScope scope) {
    if (series.values.empty()) throw EmptySeries("changing_bitmask on empty series");
    std::uint64_t mask = 0;
    if (scope == BitmaskScope::all || series.boot_of.empty()) {
        const std::uint64_t ref = series.values.front();
        for (std::uint64_t v : series.values) mask |= v ^ ref;
    } else {
        // OR of per-boot masks, each boot against its own first record.
        std::unordered_map<std::uint32_t, std::uint64_t> refs;
        for (std::size_t i = 0; i < series.values.size(); ++i) {
            auto [it, inserted] = refs.emplace(series.boot_of[i], series.values[i]);
            if (!inserted) mask |= series.values[i] ^ it->second;
        }
    }
    mask <<= series.alignment_bits;
    return Bitmask{mask, static_cast<unsigned>(std::popcount(mask))};
}

EntropyEstimate plugin_entropy(const NormalizedSeries& series) {
    if (series.values.empty()) throw EmptySeries("plugin_entropy on empty series");
    std::unordered_map<std::uint64_t, std::uint64_t> counts;
    counts.reserve(series.values.size());
    for (std::uint64_t v : series.values) ++counts[v];
    EntropyEstimate e;
    e.method = EstimatorMethod::plugin;
    e.n_samples = series.values.size();
    e.bits = empirical_entropy_bits(counts, e.n_samples);
    e.alphabet_log2 = std::log2(static_cast<double>(counts.size()));
    finalize(e);
    return e;
}

EntropyEstimate byte_plugin_entropy(const NormalizedSeries& series) {
    if (series.values.empty()) throw EmptySeries("byte_plugin_entropy on empty series");
    std::array<std::array<std::uint64_t, 256>, 8> hist{};
    for (std::uint64_t v : series.values) {
        const std::uint64_t addr = v << series.alignment_bits;
        for (unsigned pos = 0; pos < 8; ++pos) ++hist[pos][(addr >> (8 * pos)) & 0xff];
    }
    const double n = static_cast<double>(series.values.size());
    EntropyEstimate e;
    e.method = EstimatorMethod::byte_plugin;
    e.n_samples = series.values.size();
    for (unsigned pos = 0; pos < 8; ++pos) {
        double acc = 0.0;
        unsigned distinct = 0;
        for (std::uint64_t c : hist[pos]) {
            if (c == 0) continue;
            ++distinct;
            acc += static_cast<double>(c) * std::log2(static_cast<double>(c));
        }
        e.bits += std::log2(n) - acc / n;
        e.alphabet_log2 += std::log2(static_cast<double>(distinct));
    }
    if (e.bits < 0) e.bits = 0;
    finalize(e);
    return e;
}

std::uint64_t min_samples(double entropy_bits, double max_bias) {
    if (entropy_bits < 0) throw DomainError("min_samples: entropy_bits must be >= 0");
    if (!(max_bias > 0.0) || !(max_bias < 1.0)) throw DomainError("min_samples: max_bias must be in (0, 1)");
    return static_cast<std::uint64_t>(std::ceil(std::exp2(entropy_bits / 2.0) / max_bias));
}

std::vector<std::int64_t> difference_series(std::span<const std::uint64_t> a,
                                            std::span<const std::uint64_t> b) {
    if (a.size() != b.size())
        throw LengthMismatch("difference_series: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()) + " records");
    std::vector<std::int64_t> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = static_cast<std::int64_t>(a[i]) - static_cast<std::int64_t>(b[i]);
    return out;
}

Bitmask difference_bitmask(std::span<const std::int64_t> diffs) {
    if (diffs.empty()) throw EmptySeries("difference_bitmask on empty series");
    const std::int64_t lo = *std::min_element(diffs.begin(), diffs.end());
    std::uint64_t mask = 0;
    const std::uint64_t ref = static_cast<std::uint64_t>(diffs.front() - lo);
    for (std::int64_t d : diffs) mask |= static_cast<std::uint64_t>(d - lo) ^ ref;
    return Bitmask{mask, static_cast<unsigned>(std::popcount(mask))};
}

EntropyEstimate difference_entropy(std::span<const std::int64_t> diffs, EstimatorMethod method) {
    if (diffs.empty()) throw EmptySeries("difference_entropy on empty series");
    const std::int64_t lo = *std::min_element(diffs.begin(), diffs.end());
    NormalizedSeries series;
    series.alignment_bits = 0;
    series.values.reserve(diffs.size());
    for (std::int64_t d : diffs) series.values.push_back(static_cast<std::uint64_t>(d - lo));

    EntropyEstimate e;
    if (method == EstimatorMethod::nsb) {
        const Bitmask mask = difference_bitmask(diffs);
        if (mask.bit_count == 0) {
            // Constant difference: exactly zero entropy, no inference needed.
            e.method = EstimatorMethod::nsb;
            e.bits = 0.0;
            e.n_samples = diffs.size();
            e.alphabet_log2 = 0.0;
            finalize(e);
            return e;
        }
        e = nsb_entropy(series, static_cast<double>(mask.bit_count));
    } else {
        e = plugin_entropy(series);
    }
    return e;
}

EntropyEstimate correlation_entropy(std::span<const std::uint64_t> a,
                                    std::span<const std::uint64_t> b,
                                    EstimatorMethod method) {
    const auto diffs = difference_series(a, b);
    return difference_entropy(diffs, method);
}

} // namespace aslrkit
