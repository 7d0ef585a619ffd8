#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aslrkit/analysis.hpp"

namespace aslrkit {

struct ThreatModel {
    double tps = 300.0; // exploit tries per second
};

// < 20 bits falls to bruteforce within the hour at the reference rate;
// 24 bits buys about a day; 30+ holds out for weeks.
enum class WeaknessTier { critical, weak, moderate, strong };
WeaknessTier tier_for_bits(double bits);
const char* to_string(WeaknessTier tier);

struct AttackCost {
    double attempts = 0.0;
    double seconds = 0.0;
};

// Average guesses to hit an object with the given entropy: 2^bits.
AttackCost bruteforce_cost(double bits, const ThreatModel& tm);

// Repeating one payload across a region divides the search space by the
// payload size.
AttackCost spray_cost(double region_bytes, double payload_bytes, const ThreatModel& tm);

struct CrossectionGain {
    AttackCost direct;
    AttackCost leaked;
    double gain_factor = 1.0;
};

// Attack the target through a leaked correlated object: effort drops from
// the target's absolute entropy to the pair's correlation entropy.
CrossectionGain crossection_gain(double abs_bits_target, double corr_bits_via_leak,
                                 const ThreatModel& tm);

// Residual randomness when only the low bytes of a pointer are replaced:
// whole low bytes needed to express the delta, minus the bits pinned by
// page alignment.
double partial_overwrite_bits(std::uint64_t pointer_delta_bytes, unsigned page_align_bits);

enum class FindingKind { absolute, correlation_path };

struct Finding {
    FindingKind kind = FindingKind::absolute;
    std::string object;                // representative, or "a<->b" for pairs
    std::string pair_other;            // correlation_path only
    double bits = 0.0;
    WeaknessTier tier = WeaknessTier::critical;
    AttackCost cost;
    std::string notes;
};

/// One finding per group below the strong tier, plus one per pair whose
/// correlation entropy undercuts both diagonals by more than a bit and sits
/// under the 20-bit practicality line (a correlation path). Sorted worst
/// first.
std::vector<Finding> rank_weaknesses(const DistanceEntropyMatrix& matrix,
                                     const std::vector<RandomizationClass>& classes,
                                     const ThreatModel& tm);

} // namespace aslrkit
