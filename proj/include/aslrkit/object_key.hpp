#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace aslrkit {

enum class ObjectKind {
    static_section,
    stack,
    heap,
    tls,
    env,
    argv,
    shared_memory,
    library,
    malloc_alloc,
    mmap_alloc,
};

enum class ThreadId { M, ThA, ThB };

std::string_view to_string(ObjectKind kind);
std::string_view to_string(ThreadId thread);

/// Decomposed memory-object name.
///
/// Two name shapes exist: `<object>_<thread>` for per-thread objects
/// (e.g. "stack_M", "tls_ThA") and `<function>_<size>_<thread>_<seq>`
/// for dynamic allocations (e.g. "malloc_4KB_ThB_2", where the size
/// token is omitted for "mmap_single"/"mmap_huge"). A handful of
/// main-thread-only objects carry no thread suffix at all: env, argv,
/// shared_memory, executable, lib_small, lib_big.
struct ObjectKey {
    std::string base;   // object/function token: "stack", "malloc", "mmap_huge", ...
    ObjectKind kind = ObjectKind::static_section;
    ThreadId thread = ThreadId::M;
    std::optional<std::uint64_t> size_bytes; // malloc only
    std::optional<std::uint32_t> seq;        // malloc/mmap only

    // Reconstructs the canonical name; parse(format()) is the identity.
    std::string format() const;
    bool operator==(const ObjectKey&) const = default;
};

// Throws MalformedName on unknown object/thread/size tokens.
ObjectKey parse_object_key(std::string_view name);

// "4KB" -> 4096. Throws MalformedName.
std::uint64_t parse_size_token(std::string_view token);
// 4096 -> "4KB" (largest power-of-1024 unit that divides the size).
std::string format_size_token(std::uint64_t bytes);

} // namespace aslrkit
