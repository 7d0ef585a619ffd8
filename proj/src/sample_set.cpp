#include "aslrkit/sample_set.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aslrkit/errors.hpp"

namespace aslrkit {

namespace {

using nlohmann::json;

constexpr std::string_view kSchema = "aslr-samples/1";

std::string_view source_name(SampleSource s) {
    return s == SampleSource::live ? "live" : "synthetic";
}

SampleSource parse_source(std::string_view s) {
    if (s == "live") return SampleSource::live;
    if (s == "synthetic") return SampleSource::synthetic;
    throw FormatError("unknown sample source \"" + std::string(s) + "\"");
}

// Record k sits on file line k+1 (the header owns line 1).
[[noreturn]] void fail_line(std::size_t line, const std::string& why) {
    throw InvariantError("line " + std::to_string(line) + " (record " + std::to_string(line - 1) +
                         "): " + why);
}

// mmap bases are the only objects the format guarantees page alignment
// for; malloc chunks, symbol addresses and stack locals are raw pointers.
bool requires_page_alignment(const std::string& key) {
    try {
        return parse_object_key(key).kind == ObjectKind::mmap_alloc;
    } catch (const MalformedName&) {
        return false;
    }
}

} // namespace

std::string format_address(std::uint64_t addr) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(addr));
    return buf;
}

std::uint64_t parse_address(std::string_view hex) {
    if (hex.size() < 3 || hex[0] != '0' || (hex[1] != 'x' && hex[1] != 'X'))
        throw FormatError("address \"" + std::string(hex) + "\" is not 0x-prefixed hex");
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(hex.data() + 2, hex.data() + hex.size(), value, 16);
    if (ec != std::errc{} || ptr != hex.data() + hex.size())
        throw FormatError("bad hex address \"" + std::string(hex) + "\"");
    return value;
}

void SampleSet::set_keys(std::vector<std::string> keys) {
    if (!meta_.empty()) throw InvariantError("key set is fixed once records exist");
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
        throw InvariantError("duplicate object key");
    keys_ = std::move(keys);
}

std::size_t SampleSet::key_index(std::string_view name) const {
    auto it = std::lower_bound(keys_.begin(), keys_.end(), name);
    if (it == keys_.end() || *it != name)
        throw UnknownObject("no such object \"" + std::string(name) + "\"");
    return static_cast<std::size_t>(it - keys_.begin());
}

std::span<const std::uint64_t> SampleSet::row(std::size_t i) const {
    return {addresses_.data() + i * keys_.size(), keys_.size()};
}

void SampleSet::append_record(const std::string& boot_id, std::uint64_t run, std::int64_t ts,
                              std::span<const std::uint64_t> addrs) {
    if (addrs.size() != keys_.size()) throw InvariantError("record key count mismatch");
    std::uint32_t boot;
    if (!boot_ids_.empty() && boot_ids_.back() == boot_id) {
        boot = static_cast<std::uint32_t>(boot_ids_.size() - 1);
    } else {
        auto it = std::find(boot_ids_.begin(), boot_ids_.end(), boot_id);
        if (it != boot_ids_.end()) {
            boot = static_cast<std::uint32_t>(it - boot_ids_.begin());
        } else {
            boot = static_cast<std::uint32_t>(boot_ids_.size());
            boot_ids_.push_back(boot_id);
        }
    }
    if (!meta_.empty() && meta_.back().boot == boot && run <= meta_.back().run)
        throw InvariantError("run_id not strictly increasing within boot \"" + boot_id + "\"");
    meta_.push_back({boot, run, ts});
    addresses_.insert(addresses_.end(), addrs.begin(), addrs.end());
}

std::vector<std::uint64_t> SampleSet::column(std::size_t key_idx) const {
    std::vector<std::uint64_t> out(meta_.size());
    for (std::size_t i = 0; i < meta_.size(); ++i)
        out[i] = addresses_[i * keys_.size() + key_idx];
    return out;
}

std::size_t SampleSet::null_count(std::size_t key_idx) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < meta_.size(); ++i)
        if (addresses_[i * keys_.size() + key_idx] == kNullAddress) ++n;
    return n;
}

std::vector<std::uint32_t> SampleSet::boot_of_records() const {
    std::vector<std::uint32_t> out(meta_.size());
    for (std::size_t i = 0; i < meta_.size(); ++i) out[i] = meta_[i].boot;
    return out;
}

void SampleSet::validate() const {
    if (platform.page_size_bytes != 4096 && platform.page_size_bytes != 16384)
        throw InvariantError("unsupported page size " + std::to_string(platform.page_size_bytes));
    if (meta_.empty()) throw InvariantError("sample set has no records");
    const std::uint64_t page_mask = platform.page_size_bytes - 1;
    for (std::size_t k = 0; k < keys_.size(); ++k) {
        const bool page_aligned = requires_page_alignment(keys_[k]);
        for (std::size_t i = 0; i < meta_.size(); ++i) {
            std::uint64_t a = addresses_[i * keys_.size() + k];
            if (a == kNullAddress) continue;
            if (a >> 63)
                throw InvariantError("kernel-space address " + format_address(a) + " for \"" + keys_[k] + "\"");
            if (page_aligned && (a & page_mask))
                throw InvariantError("misaligned address " + format_address(a) + " for \"" + keys_[k] + "\"");
        }
    }
}

unsigned observed_alignment_bits(std::span<const std::uint64_t> addresses) {
    std::uint64_t acc = 0;
    for (std::uint64_t a : addresses) acc |= a;
    return acc == 0 ? 64u : static_cast<unsigned>(std::countr_zero(acc));
}

NormalizedSeries normalize(const ObjectKey& object, std::span<const std::uint64_t> addresses,
                           unsigned alignment_bits, bool strict,
                           std::span<const std::uint32_t> boot_of,
                           std::vector<std::string> boot_ids) {
    NormalizedSeries series;
    series.object = object;
    series.alignment_bits = alignment_bits;
    series.values.reserve(addresses.size());
    const std::uint64_t low_mask = alignment_bits >= 64 ? ~0ull : ((1ull << alignment_bits) - 1);
    for (std::uint64_t a : addresses) {
        if (strict && (a & low_mask))
            throw AlignmentError("address " + format_address(a) + " has nonzero bits below bit " +
                                 std::to_string(alignment_bits));
        series.values.push_back(alignment_bits >= 64 ? 0 : a >> alignment_bits);
    }
    series.boot_of.assign(boot_of.begin(), boot_of.end());
    series.boot_ids = std::move(boot_ids);
    return series;
}

SampleSet load_sample_set(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw FormatError("empty input");
    ++line_no;
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw FormatError("line 1: bad JSON header: " + std::string(e.what()));
    }
    if (!header.is_object() || header.value("schema", "") != kSchema)
        throw FormatError("line 1: missing or unknown schema (want \"" + std::string(kSchema) + "\")");

    SampleSet set;
    try {
        set.platform.os = header.at("os").get<std::string>();
        set.platform.arch = header.at("arch").get<std::string>();
        set.platform.kernel_version = header.at("kernel").get<std::string>();
        set.platform.page_size_bytes = header.at("page_size").get<std::uint32_t>();
        set.platform.source = parse_source(header.at("source").get<std::string>());
    } catch (const json::exception& e) {
        throw FormatError("line 1: incomplete header: " + std::string(e.what()));
    }
    if (header.contains("policy_fingerprint") && header["policy_fingerprint"].is_string())
        set.policy_fingerprint = header["policy_fingerprint"].get<std::string>();
    for (const auto& [k, v] : header.items()) {
        if (k == "schema" || k == "os" || k == "arch" || k == "kernel" || k == "page_size" ||
            k == "source" || k == "policy_fingerprint")
            continue;
        set.platform.extra[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }

    std::vector<std::uint64_t> addrs;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("line " + std::to_string(line_no) + ": bad JSON: " + std::string(e.what()));
        }
        std::string boot_id;
        std::uint64_t run = 0;
        std::int64_t ts = 0;
        const json* addr_obj = nullptr;
        try {
            boot_id = rec.at("boot").get<std::string>();
            run = rec.at("run").get<std::uint64_t>();
            ts = rec.at("ts").get<std::int64_t>();
            addr_obj = &rec.at("addr");
        } catch (const json::exception& e) {
            throw FormatError("line " + std::to_string(line_no) + ": incomplete record: " + std::string(e.what()));
        }
        if (!addr_obj->is_object())
            throw FormatError("line " + std::to_string(line_no) + ": \"addr\" is not an object");

        if (set.keys().empty()) {
            std::vector<std::string> keys;
            keys.reserve(addr_obj->size());
            for (const auto& [k, v] : addr_obj->items()) keys.push_back(k);
            set.set_keys(std::move(keys));
        }
        const auto& keys = set.keys();
        if (addr_obj->size() != keys.size()) {
            for (const auto& key : keys)
                if (!addr_obj->contains(key)) fail_line(line_no, "record is missing key \"" + key + "\"");
            for (const auto& [k, v] : addr_obj->items())
                if (!std::binary_search(keys.begin(), keys.end(), k))
                    fail_line(line_no, "record has unexpected key \"" + k + "\"");
        }
        addrs.assign(keys.size(), SampleSet::kNullAddress);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            auto it = addr_obj->find(keys[i]);
            if (it == addr_obj->end()) fail_line(line_no, "record is missing key \"" + keys[i] + "\"");
            if (it->is_null()) continue;
            if (!it->is_string())
                throw FormatError("line " + std::to_string(line_no) + ": address for \"" + keys[i] +
                                  "\" is not a string");
            std::uint64_t a;
            try {
                a = parse_address(it->get<std::string>());
            } catch (const FormatError& e) {
                throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
            }
            if (a >> 63) fail_line(line_no, "kernel-space address " + format_address(a) + " for \"" + keys[i] + "\"");
            if (requires_page_alignment(keys[i]) && (a & (set.platform.page_size_bytes - 1)))
                fail_line(line_no, "misaligned address " + format_address(a) + " for \"" + keys[i] + "\"");
            addrs[i] = a;
        }
        try {
            set.append_record(boot_id, run, ts, addrs);
        } catch (const InvariantError& e) {
            fail_line(line_no, e.what());
        }
    }
    if (set.record_count() == 0) throw InvariantError("sample set has no records");
    if (set.platform.page_size_bytes != 4096 && set.platform.page_size_bytes != 16384)
        throw InvariantError("unsupported page size " + std::to_string(set.platform.page_size_bytes));
    return set;
}

SampleSet load_sample_set_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return load_sample_set(in);
}

void save_sample_set(const SampleSet& set, std::ostream& out) {
    json header;
    header["schema"] = kSchema;
    header["os"] = set.platform.os;
    header["arch"] = set.platform.arch;
    header["kernel"] = set.platform.kernel_version;
    header["page_size"] = set.platform.page_size_bytes;
    header["source"] = source_name(set.platform.source);
    if (set.policy_fingerprint) header["policy_fingerprint"] = *set.policy_fingerprint;
    for (const auto& [k, v] : set.platform.extra) header[k] = v;
    out << header.dump() << '\n';

    const auto& keys = set.keys();
    for (std::size_t i = 0; i < set.record_count(); ++i) {
        json rec;
        rec["boot"] = set.boot_ids()[set.record(i).boot];
        rec["run"] = set.record(i).run;
        rec["ts"] = set.record(i).timestamp;
        json addr = json::object();
        auto row = set.row(i);
        for (std::size_t k = 0; k < keys.size(); ++k) {
            if (row[k] == SampleSet::kNullAddress)
                addr[keys[k]] = nullptr;
            else
                addr[keys[k]] = format_address(row[k]);
        }
        rec["addr"] = std::move(addr);
        out << rec.dump() << '\n';
    }
}

void save_sample_set_file(const SampleSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_sample_set(set, out);
    if (!out) throw IoError("write failed for " + path);
}

} // namespace aslrkit
