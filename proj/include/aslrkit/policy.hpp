#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "aslrkit/sample_set.hpp"

namespace aslrkit {

/// Declarative ASLR model. Objects are placed in list order; an object is
/// either drawn from an absolute region or chained to an earlier object
/// through an offset (zero / fixed / alignment / random), mirroring how
/// kernels derive layouts from a few randomized base addresses.

struct UniformBase {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    unsigned align_bits = 12;
};

enum class OffsetMode { zero, fixed, alignment, random };
enum class Direction { above, below };

struct RelativePlacement {
    std::string anchor;
    OffsetMode offset_mode = OffsetMode::zero;
    Direction direction = Direction::above;
    std::uint64_t fixed_bytes = 0;        // offset_mode::fixed
    unsigned align_bits = 12;             // offset_mode::alignment
    std::uint64_t random_lo = 0;          // offset_mode::random
    std::uint64_t random_hi = 0;
    unsigned random_align_bits = 12;
};

// Address = base draw + second independent uniform draw; sums of two
// uniforms give the triangular (Irwin-Hall) law seen in some allocators.
struct TwoSource {
    UniformBase base;
    std::uint64_t plus_lo = 0;
    std::uint64_t plus_hi = 0;
    unsigned align_bits = 12;
};

struct ObjectPlacement {
    std::string name;
    std::uint64_t size_bytes = 0; // extent used by relative children ("end" anchoring)
    std::variant<UniformBase, RelativePlacement, TwoSource> mode;
};

struct PolicySpec {
    unsigned page_bits = 12;
    std::vector<ObjectPlacement> objects;
    std::uint64_t seed = 0;
    std::set<std::string> boot_scoped; // draws made once per simulated boot
    std::uint64_t runs_per_boot = 1000;

    const ObjectPlacement* find(const std::string& name) const;
    void validate() const; // throws PolicyError
};

// Deterministic for a fixed (policy, n_runs); boot boundaries fall every
// runs_per_boot records.
SampleSet generate(const PolicySpec& policy, std::uint64_t n_runs);

/// Exact Shannon entropy (bits) of one object's marginal address law, or
/// nullopt when the discrete support exceeds the 2^24-state enumeration cap.
std::optional<double> analytic_entropy(const PolicySpec& policy, const std::string& object);

/// Exact Shannon entropy (bits) of addr(a) - addr(b), or nullopt beyond the
/// enumeration cap (or when alignment offsets make the difference depend on
/// a shared anchor in a way the convolution engine does not cover).
std::optional<double> analytic_corr_entropy(const PolicySpec& policy, const std::string& a,
                                            const std::string& b);

// JSON (de)serialization; the on-disk shape mirrors the structs verbatim.
PolicySpec load_policy(const std::string& json_text);
PolicySpec load_policy_file(const std::string& path);
std::string policy_to_json(const PolicySpec& policy);
std::string policy_fingerprint(const PolicySpec& policy);

// Builtin models: "linux-6.4-like", "linux-5.17-like", "windows-like".
PolicySpec builtin_policy(const std::string& name);
std::vector<std::string> builtin_policy_names();

} // namespace aslrkit
