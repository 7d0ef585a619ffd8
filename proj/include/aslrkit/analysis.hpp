#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aslrkit/estimators.hpp"
#include "aslrkit/sample_set.hpp"

namespace aslrkit {

enum class RandomizationClass { runtime, boot_time, not_randomized, indeterminate };
const char* to_string(RandomizationClass c);

// not_randomized: constant everywhere. boot_time: constant within every
// boot, varying across boots. runtime: anything else. Needs at least two
// boots and a boot with two runs to tell the first two apart; otherwise
// indeterminate.
RandomizationClass classify(std::span<const std::uint64_t> addresses,
                            std::span<const std::uint32_t> boot_of);

/// Objects whose pairwise distance never changes, reported against the
/// lexicographically first member.
struct ObjectGroup {
    std::string representative;
    std::vector<std::string> members;          // sorted; includes representative
    std::vector<std::int64_t> offsets;         // addr(member) - addr(representative)
};

// Partition of the usable (null-free) objects under the constant-difference
// relation. Order-independent: the partition only looks at value deltas.
std::vector<ObjectGroup> group_contiguous(const SampleSet& set);

struct AddressRange {
    std::string object;
    std::uint64_t min = 0;
    std::uint64_t max = 0;
};
std::vector<AddressRange> layout_ranges(const SampleSet& set);

struct Histogram {
    static constexpr unsigned kBins = 100;
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    std::vector<std::uint64_t> counts;      // kBins entries
    std::vector<double> probabilities;      // counts / n
    double max_deviation = 0.0;             // max_i |p_i - 1/kBins|
    double chi_square = 0.0;                // vs uniform, kBins-1 dof
    double p_value = 0.0;
    bool uniform_verdict = false;           // p_value > 0.01
};

// Equal-width bins over the observed [min, max]. Requires >= 100 samples;
// throws DegenerateRange when min == max.
Histogram histogram(std::span<const std::uint64_t> addresses);

struct MatrixCell {
    std::string row, col;
    std::optional<EntropyEstimate> estimate;
    std::string flags; // "low_confidence", "per_boot", error notes
};

struct DistanceEntropyMatrix {
    std::vector<std::string> labels; // group representatives
    // Diagonal: absolute estimates; off-diagonal: correlation entropies.
    std::vector<MatrixCell> cells;   // labels.size()^2, row-major, symmetric

    const MatrixCell& at(std::size_t r, std::size_t c) const { return cells[r * labels.size() + c]; }
};

struct EstimatorConfig {
    EstimatorMethod method = EstimatorMethod::nsb;
    std::optional<double> alphabet_override_bits; // absolute estimates only
    unsigned jobs = 1;
};

DistanceEntropyMatrix distance_matrix(const SampleSet& set, const std::vector<ObjectGroup>& groups,
                                      const EstimatorConfig& config);

// Shared helper: splits work across `jobs` threads, any task exception is
// rethrown on the caller.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task);

} // namespace aslrkit
