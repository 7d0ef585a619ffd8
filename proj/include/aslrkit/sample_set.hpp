#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aslrkit/object_key.hpp"

namespace aslrkit {

enum class SampleSource { live, synthetic };

struct Platform {
    std::string os;
    std::string arch;
    std::string kernel_version;
    std::uint32_t page_size_bytes = 4096;
    SampleSource source = SampleSource::synthetic;
    // Extra header fields preserved verbatim (e.g. randomize_va_space, rng).
    std::map<std::string, std::string> extra;
};

/// A campaign of address samples. Every record carries the same key set;
/// a missing address is stored as kNullAddress (serialized as JSON null).
///
/// Addresses are stored in one flat row-major array of
/// records x keys to keep million-record campaigns cheap.
class SampleSet {
public:
    static constexpr std::uint64_t kNullAddress = ~0ull;

    struct RecordMeta {
        std::uint32_t boot = 0; // index into boot_ids()
        std::uint64_t run = 0;
        std::int64_t timestamp = 0;
    };

    Platform platform;
    std::optional<std::string> policy_fingerprint;

    // Keys are sorted ascending and fixed at construction.
    void set_keys(std::vector<std::string> keys);
    const std::vector<std::string>& keys() const { return keys_; }
    std::size_t key_index(std::string_view name) const; // throws UnknownObject

    const std::vector<std::string>& boot_ids() const { return boot_ids_; }
    std::size_t record_count() const { return meta_.size(); }
    const RecordMeta& record(std::size_t i) const { return meta_[i]; }
    std::span<const std::uint64_t> row(std::size_t i) const;

    // Appends one record; addrs must be parallel to keys(). Enforces
    // run ordering within a boot.
    void append_record(const std::string& boot_id, std::uint64_t run, std::int64_t ts,
                       std::span<const std::uint64_t> addrs);

    // Column of one object across all records, nulls included.
    std::vector<std::uint64_t> column(std::size_t key_idx) const;
    std::size_t null_count(std::size_t key_idx) const;

    // Boot index per record, parallel to records.
    std::vector<std::uint32_t> boot_of_records() const;

    void validate() const; // throws InvariantError

private:
    std::vector<std::string> keys_;
    std::vector<std::string> boot_ids_;
    std::vector<RecordMeta> meta_;
    std::vector<std::uint64_t> addresses_; // meta_.size() * keys_.size()
};

/// One object's address series reduced to slot indices:
/// values[i] == address[i] >> alignment_bits.
struct NormalizedSeries {
    ObjectKey object;
    std::vector<std::uint64_t> values;
    unsigned alignment_bits = 0;
    std::vector<std::uint32_t> boot_of;  // parallel; index into boot_ids
    std::vector<std::string> boot_ids;
};

// Shifts addresses right by alignment_bits. In strict mode any nonzero
// low bits raise AlignmentError; otherwise they are truncated.
NormalizedSeries normalize(const ObjectKey& object, std::span<const std::uint64_t> addresses,
                           unsigned alignment_bits, bool strict = true,
                           std::span<const std::uint32_t> boot_of = {},
                           std::vector<std::string> boot_ids = {});

// Number of low zero bits common to every value (64 for an all-zero span).
unsigned observed_alignment_bits(std::span<const std::uint64_t> addresses);

// JSON Lines interchange. Line 1 is the header object; each further line
// is one run record. load validates all invariants and reports offending
// line numbers; save emits the canonical byte form (sorted keys, lowercase
// 16-digit hex addresses, LF line ends).
SampleSet load_sample_set(std::istream& in);
SampleSet load_sample_set_file(const std::string& path);
void save_sample_set(const SampleSet& set, std::ostream& out);
void save_sample_set_file(const SampleSet& set, const std::string& path);

std::string format_address(std::uint64_t addr);
std::uint64_t parse_address(std::string_view hex); // throws FormatError

} // namespace aslrkit
