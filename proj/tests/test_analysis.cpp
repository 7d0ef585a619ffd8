#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "aslrkit/analysis.hpp"
#include "aslrkit/errors.hpp"
#include "aslrkit/policy.hpp"
#include "aslrkit/report.hpp"

using namespace aslrkit;

namespace {

SampleSet columns_to_set(const std::vector<std::pair<std::string, std::vector<std::uint64_t>>>& cols,
                         std::size_t runs_per_boot = 1000) {
    SampleSet set;
    set.platform = {"linux", "x86_64", "test", 4096, SampleSource::synthetic, {}};
    std::vector<std::string> keys;
    for (const auto& [name, values] : cols) keys.push_back(name);
    set.set_keys(keys);
    const std::size_t n = cols.front().second.size();
    std::vector<std::uint64_t> row(cols.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < cols.size(); ++k) row[set.key_index(cols[k].first)] = cols[k].second[i];
        set.append_record("boot-" + std::to_string(i / runs_per_boot), i, 0, row);
    }
    return set;
}

} // namespace

TEST_CASE("classification separates runtime, boot and static placements") {
    std::vector<std::uint64_t> addrs;
    std::vector<std::uint32_t> boots;

    // constant across 10 boots x 100 runs
    for (int b = 0; b < 10; ++b)
        for (int r = 0; r < 100; ++r) {
            addrs.push_back(0x7f0000000000);
            boots.push_back(b);
        }
    CHECK(classify(addrs, boots) == RandomizationClass::not_randomized);

    // constant within each boot, varying across
    addrs.clear();
    for (int b = 0; b < 10; ++b)
        for (int r = 0; r < 100; ++r) addrs.push_back(0x7f0000000000 + (std::uint64_t(b) << 16));
    CHECK(classify(addrs, boots) == RandomizationClass::boot_time);

    // varying within a boot
    addrs.clear();
    for (std::size_t i = 0; i < boots.size(); ++i) addrs.push_back(0x7f0000000000 + (i << 12));
    CHECK(classify(addrs, boots) == RandomizationClass::runtime);

    // a single boot cannot distinguish boot scope from none
    std::vector<std::uint64_t> one_boot{1 << 12, 2 << 12, 3 << 12};
    std::vector<std::uint32_t> zero{0, 0, 0};
    CHECK(classify(one_boot, zero) == RandomizationClass::indeterminate);

    // translation does not change the verdict
    addrs.clear();
    for (int b = 0; b < 10; ++b)
        for (int r = 0; r < 100; ++r) addrs.push_back(0x100000 + (std::uint64_t(b) << 16));
    CHECK(classify(addrs, boots) == RandomizationClass::boot_time);
}

TEST_CASE("boot-scoped synthetic objects classify as boot_time") {
    PolicySpec p;
    p.page_bits = 12;
    p.runs_per_boot = 20;
    p.boot_scoped = {"image"};
    ObjectPlacement image;
    image.name = "image";
    image.mode = UniformBase{0x7ff800000000, 0x800000000000, 16};
    p.objects.push_back(image);
    ObjectPlacement heap;
    heap.name = "heap_M";
    heap.mode = UniformBase{0x000100000000, 0x000100000000 + (1ull << 30), 12};
    p.objects.push_back(heap);

    const SampleSet set = generate(p, 200);
    const auto boots = set.boot_of_records();
    CHECK(classify(set.column(set.key_index("image")), boots) == RandomizationClass::boot_time);
    CHECK(classify(set.column(set.key_index("heap_M")), boots) == RandomizationClass::runtime);
}

TEST_CASE("grouping joins exactly the constant-difference objects") {
    std::mt19937_64 rng(3);
    std::vector<std::uint64_t> a, b, c;
    for (int i = 0; i < 500; ++i) {
        const std::uint64_t base = 0x550000000000 + ((rng() & 0xffff) << 12);
        a.push_back(base);
        b.push_back(base + 0x20000); // zero-entropy offset from a
        c.push_back(0x7f0000000000 + ((rng() & 0xffff) << 12));
    }
    const SampleSet set = columns_to_set({{"alpha", a}, {"beta", b}, {"gamma", c}});
    const auto groups = group_contiguous(set);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].representative == "alpha");
    CHECK(groups[0].members == std::vector<std::string>{"alpha", "beta"});
    CHECK(groups[0].offsets == std::vector<std::int64_t>{0, 0x20000});
    CHECK(groups[1].members == std::vector<std::string>{"gamma"});

    // Record order cannot change the partition.
    std::vector<std::uint64_t> ra(a.rbegin(), a.rend()), rb(b.rbegin(), b.rend()), rc(c.rbegin(), c.rend());
    const auto reversed = group_contiguous(columns_to_set({{"alpha", ra}, {"beta", rb}, {"gamma", rc}}));
    REQUIRE(reversed.size() == 2);
    CHECK(reversed[0].members == groups[0].members);

    // Partition property: disjoint and covering.
    std::size_t total = 0;
    for (const auto& g : groups) total += g.members.size();
    CHECK(total == 3);
}

TEST_CASE("independent objects stay singletons") {
    std::mt19937_64 rng(9);
    std::vector<std::uint64_t> a, b;
    for (int i = 0; i < 300; ++i) {
        a.push_back(0x550000000000 + ((rng() & 0xfff) << 12));
        b.push_back(0x7f0000000000 + ((rng() & 0xfff) << 12));
    }
    const auto groups = group_contiguous(columns_to_set({{"a", a}, {"b", b}}));
    CHECK(groups.size() == 2);
}

TEST_CASE("layout ranges record the observed envelope") {
    std::vector<std::uint64_t> fixed(200, 0x7f0000000000);
    std::vector<std::uint64_t> moving;
    for (int i = 0; i < 200; ++i) moving.push_back(0x550000000000 + (std::uint64_t(i) << 12));
    const auto ranges = layout_ranges(columns_to_set({{"fixed", fixed}, {"moving", moving}}));
    CHECK(ranges[0].object == "fixed");
    CHECK(ranges[0].min == ranges[0].max);
    CHECK(ranges[1].min == 0x550000000000);
    CHECK(ranges[1].max == 0x550000000000 + (199ull << 12));
}

TEST_CASE("histograms bin into 100 equal cells and detect uniformity") {
    std::mt19937_64 rng(13);
    std::vector<std::uint64_t> uniform;
    for (int i = 0; i < 100000; ++i) uniform.push_back((rng() % (1 << 20)) << 12);
    const Histogram h = histogram(uniform);
    CHECK(h.counts.size() == 100);
    std::uint64_t total = 0;
    for (auto c : h.counts) total += c;
    CHECK(total == uniform.size());
    CHECK(h.uniform_verdict);
    CHECK(h.max_deviation < 0.002);

    std::vector<std::uint64_t> point(500, 0x1000);
    CHECK_THROWS_AS(histogram(point), DegenerateRange);
    std::vector<std::uint64_t> few{1, 2, 3};
    CHECK_THROWS_AS(histogram(few), EmptySeries);
}

TEST_CASE("a spiked distribution fails the uniformity verdict") {
    std::mt19937_64 rng(17);
    std::vector<std::uint64_t> spiked;
    for (int i = 0; i < 50000; ++i) {
        std::uint64_t v = rng() % (1 << 20);
        if (i % 3 == 0) v = v % (1 << 16); // pile a third of the mass at the bottom
        spiked.push_back(v << 12);
    }
    CHECK_FALSE(histogram(spiked).uniform_verdict);
}

TEST_CASE("the distance matrix is symmetric and zero inside groups") {
    std::mt19937_64 rng(21);
    std::vector<std::uint64_t> a, b, c;
    for (int i = 0; i < 4000; ++i) {
        const std::uint64_t base = 0x550000000000 + ((rng() & 0x3ff) << 12);
        a.push_back(base);
        b.push_back(base + 0x5000);
        c.push_back(0x7f0000000000 + ((rng() & 0x3ff) << 12));
    }
    const SampleSet set = columns_to_set({{"a", a}, {"b", b}, {"c", c}});
    const auto groups = group_contiguous(set);
    REQUIRE(groups.size() == 2); // {a, b} and {c}

    EstimatorConfig cfg;
    cfg.method = EstimatorMethod::nsb;
    cfg.jobs = 2;
    const auto matrix = distance_matrix(set, groups, cfg);
    REQUIRE(matrix.labels.size() == 2);
    CHECK(matrix.at(0, 1).estimate->bits == matrix.at(1, 0).estimate->bits);
    CHECK(matrix.at(0, 1).row == matrix.at(1, 0).col);

    // Inside a group the difference is constant: exactly zero entropy.
    const auto e = correlation_entropy(a, b);
    CHECK(e.bits == 0.0);

    // Diagonals carry the absolute estimates (about 10 bits here).
    CHECK(matrix.at(0, 0).estimate->bits == doctest::Approx(10.0).epsilon(0.05));
    CHECK(matrix.at(1, 1).estimate->bits == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("boot-scoped pairs reduce to per-boot samples") {
    PolicySpec p;
    p.page_bits = 12;
    p.runs_per_boot = 50;
    p.boot_scoped = {"img", "lib"};
    ObjectPlacement img;
    img.name = "img";
    img.mode = UniformBase{0x7ff800000000, 0x800000000000, 16};
    p.objects.push_back(img);
    ObjectPlacement lib;
    lib.name = "lib";
    lib.mode = UniformBase{0x7ff800000000, 0x800000000000, 16};
    p.objects.push_back(lib);

    const SampleSet set = generate(p, 5000); // 100 boots
    const auto groups = group_contiguous(set);
    EstimatorConfig cfg;
    const auto matrix = distance_matrix(set, groups, cfg);
    const auto& off = matrix.at(0, 1);
    REQUIRE(off.estimate.has_value());
    CHECK(off.estimate->scope == EstimateScope::per_boot);
    CHECK(off.estimate->n_samples == 100);
    CHECK(off.flags.find("per_boot") != std::string::npos);
    // Diagonals reduce too.
    CHECK(matrix.at(0, 0).estimate->scope == EstimateScope::per_boot);
    CHECK(matrix.at(0, 0).estimate->n_samples == 100);
}

TEST_CASE("analyze excludes objects with missing addresses") {
    SampleSet set;
    set.platform = {"linux", "x86_64", "test", 4096, SampleSource::live, {}};
    set.set_keys({"good", "holey"});
    std::mt19937_64 rng(33);
    for (int i = 0; i < 300; ++i) {
        std::vector<std::uint64_t> row(2);
        row[set.key_index("good")] = 0x550000000000 + ((rng() & 0xff) << 12);
        row[set.key_index("holey")] = i == 7 ? SampleSet::kNullAddress : 0x7f0000000000 + ((rng() & 0xff) << 12);
        set.append_record("boot-" + std::to_string(i / 100), i, 0, row);
    }
    const AnalysisReport report = analyze(set, {});
    REQUIRE(report.excluded == std::vector<std::string>{"holey"});
    CHECK(report.groups.size() == 1);
    CHECK(report.groups[0].group.representative == "good");
    // Every object appears exactly once: either in a group or excluded.
    std::size_t accounted = report.excluded.size();
    for (const auto& g : report.groups) accounted += g.group.members.size();
    CHECK(accounted == set.keys().size());
}
