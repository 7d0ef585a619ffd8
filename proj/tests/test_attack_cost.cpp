#include <doctest.h>

#include <cmath>

#include "aslrkit/attack_cost.hpp"
#include "aslrkit/errors.hpp"

using namespace aslrkit;

namespace {
const ThreatModel kRef{300.0};
}

TEST_CASE("bruteforce cost is 2^bits attempts") {
    CHECK(bruteforce_cost(19, kRef).attempts == 524288.0);
    CHECK(bruteforce_cost(19, kRef).seconds == doctest::Approx(524288.0 / 300));

    // Measured single-exploit run: 283 tps put the expected effort around
    // half an hour.
    const auto measured = bruteforce_cost(19, ThreatModel{283.0});
    CHECK(measured.seconds == doctest::Approx(1852.6).epsilon(0.001));
    CHECK(measured.seconds / 60 > 30.0);
    CHECK(measured.seconds / 60 < 32.0);

    const auto hour = bruteforce_cost(20, kRef);
    CHECK(hour.seconds == doctest::Approx(3495.25).epsilon(1e-6));
    CHECK(std::fabs(hour.seconds - 3600.0) / 3600.0 < 0.05); // about one hour

    CHECK_THROWS_AS(bruteforce_cost(-1, kRef), DomainError);
    CHECK_THROWS_AS(bruteforce_cost(10, ThreatModel{0.0}), DomainError);
}

TEST_CASE("bruteforce attempts grow with bits, seconds shrink with tps") {
    double prev = 0;
    for (double bits : {0.0, 10.0, 19.0, 24.5, 30.0}) {
        const double attempts = bruteforce_cost(bits, kRef).attempts;
        CHECK(attempts > prev);
        prev = attempts;
    }
    CHECK(bruteforce_cost(20, ThreatModel{600}).seconds < bruteforce_cost(20, ThreatModel{300}).seconds);
}

TEST_CASE("spraying divides the region by the payload") {
    const auto looney = spray_cost(24.0 * (1ull << 30), 6.0 * (1 << 20), kRef);
    CHECK(looney.attempts == 4096.0);
    CHECK(looney.seconds == doctest::Approx(13.6533).epsilon(0.01)); // about 14 seconds
    CHECK(spray_cost(4096, 4096, kRef).attempts == 1.0);
    CHECK_THROWS_AS(spray_cost(4096, 8192, kRef), DomainError);

    // Environment-area example: direct guessing needs 2^24.5 tries, the
    // spray needs 4,096.
    const auto direct = bruteforce_cost(24.5, kRef);
    CHECK(std::fabs(direct.attempts - 23726566.0) < 1.0);
    CHECK(direct.attempts / looney.attempts > 5000.0);
}

TEST_CASE("a leaked correlated object collapses the search space") {
    const auto gain = crossection_gain(28.8, 13.0, kRef);
    CHECK(std::fabs(gain.direct.attempts - 467373275.0) < 1.0);
    CHECK(gain.direct.seconds / 86400 == doctest::Approx(18.0).epsilon(0.01)); // about 18 days
    CHECK(gain.leaked.attempts == 8192.0);
    CHECK(gain.leaked.seconds == doctest::Approx(27.3).epsilon(0.01)); // about 27 seconds
    CHECK(gain.gain_factor == doctest::Approx(gain.direct.attempts / 8192.0));

    CHECK(crossection_gain(20, 25, kRef).gain_factor == 1.0); // useless leak
    CHECK(crossection_gain(28.8, 0, kRef).leaked.attempts == 1.0); // fixed offset
}

TEST_CASE("crossection gain never drops below one") {
    for (double abs_bits : {5.0, 19.0, 28.8})
        for (double corr : {0.0, 13.0, 30.0}) CHECK(crossection_gain(abs_bits, corr, kRef).gain_factor >= 1.0);
}

TEST_CASE("partial overwrite residual bits match the reference cases") {
    CHECK(partial_overwrite_bits(200, 12) == 0.0);     // deterministic
    CHECK(partial_overwrite_bits(3000, 12) == 4.0);    // 16 attempts
    CHECK(partial_overwrite_bits(100000, 12) == 12.0); // 4096 attempts
    CHECK(partial_overwrite_bits(50000, 21) == 0.0);   // folio alignment
    CHECK(partial_overwrite_bits(0, 12) == 0.0);

    double prev = 0;
    for (std::uint64_t delta : {0ull, 100ull, 255ull, 256ull, 70000ull, 1ull << 30}) {
        const double bits = partial_overwrite_bits(delta, 12);
        CHECK(bits >= prev);
        prev = bits;
    }
    CHECK(partial_overwrite_bits(100000, 21) <= partial_overwrite_bits(100000, 12));
    CHECK(partial_overwrite_bits(1ull << 40, 12) >= 0.0);
}

TEST_CASE("tiers follow the reference thresholds") {
    CHECK(tier_for_bits(0) == WeaknessTier::critical);
    CHECK(tier_for_bits(19.99) == WeaknessTier::critical);
    CHECK(tier_for_bits(20) == WeaknessTier::weak);
    CHECK(tier_for_bits(23.9) == WeaknessTier::weak);
    CHECK(tier_for_bits(24) == WeaknessTier::moderate);
    CHECK(tier_for_bits(29.9) == WeaknessTier::moderate);
    CHECK(tier_for_bits(30) == WeaknessTier::strong);

    // Anchor costs at 300 tps: 41-ish days at 30 bits, an hour at 20,
    // minutes at 15, a day-and-change at 25.
    CHECK(std::fabs(bruteforce_cost(30, kRef).seconds / 86400 - 41.0) / 41.0 < 0.05);
    CHECK(std::fabs(bruteforce_cost(20, kRef).seconds / 3600 - 1.0) < 0.05);
    const double min15 = bruteforce_cost(15, kRef).seconds / 60;
    CHECK(min15 > 1.5);
    CHECK(min15 < 2.5);
    const double days25 = bruteforce_cost(25, kRef).seconds / 86400;
    CHECK(days25 > 1.0);
    CHECK(days25 < 1.5);
}

namespace {

DistanceEntropyMatrix matrix_from(const std::vector<std::string>& labels,
                                  const std::vector<std::vector<double>>& bits) {
    DistanceEntropyMatrix m;
    m.labels = labels;
    m.cells.resize(labels.size() * labels.size());
    for (std::size_t r = 0; r < labels.size(); ++r) {
        for (std::size_t c = 0; c < labels.size(); ++c) {
            MatrixCell cell;
            cell.row = labels[r];
            cell.col = labels[c];
            EntropyEstimate e;
            e.method = EstimatorMethod::nsb;
            e.bits = bits[r][c];
            e.n_samples = 1000000;
            cell.estimate = e;
            m.cells[r * labels.size() + c] = cell;
        }
    }
    return m;
}

} // namespace

TEST_CASE("strong independent layouts produce no findings") {
    const auto m = matrix_from({"a", "b"}, {{31.0, 31.5}, {31.5, 32.0}});
    const auto findings =
        rank_weaknesses(m, {RandomizationClass::runtime, RandomizationClass::runtime}, kRef);
    CHECK(findings.empty());
}

TEST_CASE("fixed-offset pairs with strong absolutes rank on top") {
    const auto m = matrix_from({"a", "b"}, {{31.0, 0.0}, {0.0, 32.0}});
    const auto findings =
        rank_weaknesses(m, {RandomizationClass::runtime, RandomizationClass::runtime}, kRef);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].kind == FindingKind::correlation_path);
    CHECK(findings[0].bits == 0.0);
    CHECK(findings[0].tier == WeaknessTier::critical);
    CHECK(findings[0].cost.attempts == 1.0);
}

TEST_CASE("findings sort by tier then ascending bits") {
    const auto m = matrix_from({"a", "b", "c"},
                               {{19.0, 30.0, 13.0}, {30.0, 25.0, 31.0}, {13.0, 31.0, 28.0}});
    const auto findings = rank_weaknesses(
        m, {RandomizationClass::runtime, RandomizationClass::boot_time, RandomizationClass::runtime},
        kRef);
    // (a,c) path at 13 bits, a at 19 bits, b at 25, c at 28.
    REQUIRE(findings.size() == 4);
    CHECK(findings[0].kind == FindingKind::correlation_path);
    CHECK(findings[0].bits == 13.0);
    CHECK(findings[1].object == "a");
    CHECK(findings[2].object == "b");
    CHECK(findings[2].notes.find("boot-time") != std::string::npos);
    CHECK(findings[3].object == "c");
}

TEST_CASE("near-diagonal correlation estimates are not flagged as paths") {
    // 1-bit margin: corr at min(diag) - 0.5 stays quiet.
    const auto m = matrix_from({"a", "b"}, {{18.0, 17.5}, {17.5, 18.0}});
    const auto findings =
        rank_weaknesses(m, {RandomizationClass::runtime, RandomizationClass::runtime}, kRef);
    CHECK(findings.size() == 2);
    for (const auto& f : findings) CHECK(f.kind == FindingKind::absolute);
}
