#include <doctest.h>

#include <random>
#include <sstream>
#include <unordered_set>

#include "aslrkit/errors.hpp"
#include "aslrkit/sample_set.hpp"
#include "aslrkit/sampler.hpp"

using namespace aslrkit;

namespace {

const char* kHeader =
    R"({"schema":"aslr-samples/1","os":"linux","arch":"x86_64","kernel":"6.4.9","page_size":4096,"source":"live"})";

std::string record_line(const std::vector<std::pair<std::string, std::string>>& addrs, int run) {
    std::string addr;
    for (const auto& [k, v] : addrs) {
        if (!addr.empty()) addr += ',';
        addr += "\"" + k + "\":" + v;
    }
    return "{\"boot\":\"b0\",\"run\":" + std::to_string(run) + ",\"ts\":0,\"addr\":{" + addr + "}}";
}

} // namespace

TEST_CASE("a one-line campaign with the default 63-key set loads as one record") {
    CampaignConfig config;
    config.n_runs = 1;
    config.output_path = "unused";
    const auto keys = config.expected_keys();
    CHECK(keys.size() == 63); // 3 threads x 2 rounds x (6 mallocs + 2 mmaps) + 3x3 + 6

    std::vector<std::pair<std::string, std::string>> addrs;
    std::uint64_t base = 0x7f0000000000;
    for (const auto& k : keys) {
        addrs.push_back({k, "\"" + format_address(base) + "\""});
        base += 0x1000;
    }
    std::istringstream in(std::string(kHeader) + "\n" + record_line(addrs, 0) + "\n");
    const SampleSet set = load_sample_set(in);
    CHECK(set.record_count() == 1);
    CHECK(set.keys().size() == 63);
    set.validate();
}

TEST_CASE("kernel-space addresses are rejected with a line number") {
    std::istringstream in(std::string(kHeader) + "\n" +
                          record_line({{"executable", "\"0xffff800000001000\""}}, 0) + "\n");
    CHECK_THROWS_WITH_AS(load_sample_set(in),
                         doctest::Contains("0xffff800000001000"), InvariantError);
}

TEST_CASE("a record missing one key names the key and the record") {
    std::istringstream in(std::string(kHeader) + "\n" +
                          record_line({{"env", "\"0x00007f0000001000\""},
                                       {"executable", "\"0x0000550000000000\""}},
                                      0) +
                          "\n" + record_line({{"executable", "\"0x0000550000002000\""}}, 1) + "\n");
    try {
        load_sample_set(in);
        FAIL("expected InvariantError");
    } catch (const InvariantError& e) {
        const std::string what = e.what();
        CHECK(what.find("env") != std::string::npos);
        CHECK(what.find("record 2") != std::string::npos);
    }
}

TEST_CASE("missing objects load as explicit nulls, never dropped") {
    std::istringstream in(std::string(kHeader) + "\n" +
                          record_line({{"env", "null"}, {"executable", "\"0x0000550000000000\""}}, 0) +
                          "\n");
    const SampleSet set = load_sample_set(in);
    CHECK(set.null_count(set.key_index("env")) == 1);
    CHECK(set.null_count(set.key_index("executable")) == 0);
}

TEST_CASE("canonical files survive a load/save round trip byte for byte") {
    SampleSet set;
    set.platform = {"linux", "x86_64", "6.4.9", 4096, SampleSource::live, {}};
    set.set_keys({"executable", "env", "mmap_single_M_1"});
    std::vector<std::uint64_t> row{0x7f0000002abc, 0x550000001000, 0x7f0000003000};
    set.append_record("boot-a", 0, 100, row);
    row = {0x7f0000004abc, 0x550000005000, SampleSet::kNullAddress};
    set.append_record("boot-a", 1, 101, row);

    std::ostringstream first;
    save_sample_set(set, first);
    std::istringstream reload(first.str());
    std::ostringstream second;
    save_sample_set(load_sample_set(reload), second);
    CHECK(first.str() == second.str());
}

TEST_CASE("addresses serialize as lowercase 16-digit hex") {
    CHECK(format_address(0x7FAB00000123) == "0x00007fab00000123");
    CHECK(parse_address("0x00007fab00000123") == 0x7fab00000123);
    CHECK_THROWS_AS(parse_address("7fab"), FormatError);
    CHECK_THROWS_AS(parse_address("0xZZ"), FormatError);
}

TEST_CASE("run ids must strictly increase within a boot") {
    SampleSet set;
    set.platform.page_size_bytes = 4096;
    set.set_keys({"executable"});
    std::vector<std::uint64_t> row{0x550000000000};
    set.append_record("b0", 5, 0, row);
    CHECK_THROWS_AS(set.append_record("b0", 5, 0, row), InvariantError);
    set.append_record("b1", 0, 0, row); // new boot restarts numbering
}

TEST_CASE("page size outside the supported set fails validation") {
    SampleSet set;
    set.platform.page_size_bytes = 8192;
    set.set_keys({"executable"});
    std::vector<std::uint64_t> row{0x550000000000};
    set.append_record("b0", 0, 0, row);
    CHECK_THROWS_AS(set.validate(), InvariantError);
}

TEST_CASE("normalize shifts by the alignment and round-trips") {
    std::vector<std::uint64_t> addrs{0x7f0000001000, 0x7f0000003000};
    const auto series = normalize(ObjectKey{}, addrs, 12);
    CHECK(series.values == std::vector<std::uint64_t>{0x7f0000001, 0x7f0000003});

    std::vector<std::uint64_t> misaligned{0x7f0000001800};
    CHECK_THROWS_AS(normalize(ObjectKey{}, misaligned, 12, true), AlignmentError);
    const auto truncated = normalize(ObjectKey{}, misaligned, 12, false);
    CHECK(truncated.values == std::vector<std::uint64_t>{0x7f0000001});

    std::vector<std::uint64_t> huge{0x200000};
    CHECK(normalize(ObjectKey{}, huge, 21).values == std::vector<std::uint64_t>{0x1});
}

TEST_CASE("normalize is injective on aligned inputs") {
    std::mt19937_64 rng(42);
    std::vector<std::uint64_t> addrs;
    for (int i = 0; i < 5000; ++i) addrs.push_back((rng() & 0x7fffffffff) << 12);
    const auto series = normalize(ObjectKey{}, addrs, 12);
    std::unordered_set<std::uint64_t> in(addrs.begin(), addrs.end());
    std::unordered_set<std::uint64_t> out(series.values.begin(), series.values.end());
    CHECK(in.size() == out.size());
    for (std::size_t i = 0; i < addrs.size(); ++i) REQUIRE((series.values[i] << 12) == addrs[i]);
}

TEST_CASE("observed alignment is the common low-zero count") {
    std::vector<std::uint64_t> addrs{0x200000, 0x400000, 0x680000};
    CHECK(observed_alignment_bits(addrs) == 19); // 0x680000 has 19 trailing zeros
    std::vector<std::uint64_t> single{0x1000};
    CHECK(observed_alignment_bits(single) == 12);
}
