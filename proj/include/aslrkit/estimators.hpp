#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aslrkit/sample_set.hpp"

namespace aslrkit {

/// OR of XORs against a per-scope reference value, reported at address bit
/// positions. popcount bounds how many bits the randomization ever touched.
struct Bitmask {
    std::uint64_t mask = 0;
    unsigned bit_count = 0;
};

enum class BitmaskScope { all, within_boot };

enum class EstimatorMethod { nsb, plugin, byte_plugin, bitmask_upper_bound };
enum class EstimateScope { per_record, per_boot };

struct EntropyEstimate {
    EstimatorMethod method = EstimatorMethod::plugin;
    double bits = 0.0;
    double posterior_std_bits = 0.0; // nsb only
    std::size_t n_samples = 0;
    double alphabet_log2 = 0.0;
    double bias_bound = 0.0;      // 2^(bits/2) / n
    bool low_confidence = false;  // bias_bound above 5%
    EstimateScope scope = EstimateScope::per_record;
};

const char* method_name(EstimatorMethod method);

Bitmask changing_bitmask(const NormalizedSeries& series, BitmaskScope scope = BitmaskScope::all);

// Shannon entropy of the empirical distribution over whole values.
EntropyEstimate plugin_entropy(const NormalizedSeries& series);

// Sum of per-byte-position plugin entropies of the raw addresses. Assumes
// byte independence, so it overestimates correlated layouts; reported as a
// comparison baseline only.
EntropyEstimate byte_plugin_entropy(const NormalizedSeries& series);

/// Nemenman-Shafee-Bialek posterior mean entropy and standard deviation
/// for an alphabet of 2^alphabet_size_log2 symbols. Suited to the
/// under-sampled regime where plugin estimates collapse; informative as
/// soon as the sample contains coincidences.
EntropyEstimate nsb_entropy(const NormalizedSeries& series, double alphabet_size_log2);

// Smallest N with estimator bias bound 2^(entropy_bits/2)/N below max_bias.
std::uint64_t min_samples(double entropy_bits, double max_bias);

// Per-record differences a[i] - b[i]; series must be equally long.
std::vector<std::int64_t> difference_series(std::span<const std::uint64_t> a,
                                            std::span<const std::uint64_t> b);

/// Entropy of the pairwise difference of two address series. For NSB the
/// alphabet is 2^popcount of the changing bitmask of the zero-based
/// differences. High estimates for independent pairs may carry a large
/// bias bound; such estimates are flagged low_confidence.
EntropyEstimate correlation_entropy(std::span<const std::uint64_t> a,
                                    std::span<const std::uint64_t> b,
                                    EstimatorMethod method = EstimatorMethod::nsb);

// Entropy of an explicit difference series (used after per-boot reduction).
EntropyEstimate difference_entropy(std::span<const std::int64_t> diffs, EstimatorMethod method);

// Changing bitmask of a difference series, computed on zero-based values so
// sign bits do not pollute the mask.
Bitmask difference_bitmask(std::span<const std::int64_t> diffs);

} // namespace aslrkit
