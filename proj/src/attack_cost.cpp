#include "aslrkit/attack_cost.hpp"

#include <algorithm>
#include <cmath>

#include "aslrkit/errors.hpp"

namespace aslrkit {

WeaknessTier tier_for_bits(double bits) {
    if (bits < 20.0) return WeaknessTier::critical;
    if (bits < 24.0) return WeaknessTier::weak;
    if (bits < 30.0) return WeaknessTier::moderate;
    return WeaknessTier::strong;
}

const char* to_string(WeaknessTier tier) {
    switch (tier) {
        case WeaknessTier::critical: return "critical";
        case WeaknessTier::weak: return "weak";
        case WeaknessTier::moderate: return "moderate";
        case WeaknessTier::strong: return "strong";
    }
    return "?";
}

AttackCost bruteforce_cost(double bits, const ThreatModel& tm) {
    if (bits < 0) throw DomainError("bruteforce_cost: bits must be >= 0");
    if (!(tm.tps > 0) || !std::isfinite(tm.tps)) throw DomainError("threat model tps must be finite and positive");
    AttackCost c;
    c.attempts = std::exp2(bits);
    c.seconds = c.attempts / tm.tps;
    return c;
}

AttackCost spray_cost(double region_bytes, double payload_bytes, const ThreatModel& tm) {
    if (!(region_bytes > 0) || !(payload_bytes > 0))
        throw DomainError("spray_cost: region and payload must be positive");
    if (payload_bytes > region_bytes) throw DomainError("spray_cost: payload exceeds region");
    if (!(tm.tps > 0) || !std::isfinite(tm.tps)) throw DomainError("threat model tps must be finite and positive");
    AttackCost c;
    c.attempts = region_bytes / payload_bytes;
    c.seconds = c.attempts / tm.tps;
    return c;
}

CrossectionGain crossection_gain(double abs_bits_target, double corr_bits_via_leak,
                                 const ThreatModel& tm) {
    if (abs_bits_target < 0 || corr_bits_via_leak < 0)
        throw DomainError("crossection_gain: entropies must be >= 0");
    CrossectionGain g;
    g.direct = bruteforce_cost(abs_bits_target, tm);
    g.leaked = bruteforce_cost(std::min(abs_bits_target, corr_bits_via_leak), tm);
    g.gain_factor = g.direct.attempts / g.leaked.attempts;
    return g;
}

double partial_overwrite_bits(std::uint64_t pointer_delta_bytes, unsigned page_align_bits) {
    if (page_align_bits < 12) throw DomainError("partial_overwrite_bits: page_align_bits must be >= 12");
    unsigned overwritten_bytes = 0;
    std::uint64_t reach = 1; // deltas expressible with this many low bytes: < 256^bytes
    while (pointer_delta_bytes >= reach && overwritten_bytes < 8) {
        reach *= 256;
        ++overwritten_bytes;
    }
    const double overwritten_bits = 8.0 * overwritten_bytes;
    return std::max(0.0, overwritten_bits - static_cast<double>(page_align_bits));
}

std::vector<Finding> rank_weaknesses(const DistanceEntropyMatrix& matrix,
                                     const std::vector<RandomizationClass>& classes,
                                     const ThreatModel& tm) {
    const std::size_t n = matrix.labels.size();
    std::vector<Finding> findings;

    auto diagonal_bits = [&](std::size_t i) -> std::optional<double> {
        const auto& cell = matrix.at(i, i);
        if (!cell.estimate) return std::nullopt;
        return cell.estimate->bits;
    };

    for (std::size_t i = 0; i < n; ++i) {
        auto bits = diagonal_bits(i);
        if (!bits) continue;
        const WeaknessTier tier = tier_for_bits(*bits);
        if (tier == WeaknessTier::strong) continue;
        Finding f;
        f.kind = FindingKind::absolute;
        f.object = matrix.labels[i];
        f.bits = *bits;
        f.tier = tier;
        f.cost = bruteforce_cost(*bits, tm);
        if (i < classes.size() && classes[i] == RandomizationClass::boot_time)
            f.notes = "boot-time randomized: effort amortizes across every process until reboot";
        else if (i < classes.size() && classes[i] == RandomizationClass::not_randomized)
            f.notes = "not randomized at all";
        findings.push_back(std::move(f));
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& cell = matrix.at(i, j);
            auto bi = diagonal_bits(i);
            auto bj = diagonal_bits(j);
            if (!cell.estimate || !bi || !bj) continue;
            const double corr = cell.estimate->bits;
            // The one-bit margin keeps estimator noise on independent pairs
            // from registering as correlation.
            if (corr >= std::min(*bi, *bj) - 1.0 || corr >= 20.0) continue;
            Finding f;
            f.kind = FindingKind::correlation_path;
            f.object = matrix.labels[i];
            f.pair_other = matrix.labels[j];
            f.bits = corr;
            f.tier = tier_for_bits(corr);
            f.cost = bruteforce_cost(corr, tm);
            f.notes = "leak one side, bruteforce the other through the offset";
            findings.push_back(std::move(f));
        }
    }

    std::sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
        if (a.tier != b.tier) return static_cast<int>(a.tier) < static_cast<int>(b.tier);
        if (a.bits != b.bits) return a.bits < b.bits;
        if (a.object != b.object) return a.object < b.object;
        return a.pair_other < b.pair_other;
    });
    return findings;
}

} // namespace aslrkit
