#include "aslrkit/object_key.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <vector>

#include "aslrkit/errors.hpp"

namespace aslrkit {

namespace {

struct BaseInfo {
    std::string_view base;
    ObjectKind kind;
    bool thread_suffix; // name carries _M/_ThA/_ThB
    bool dynamic;       // name carries a sequence number
};

// The full object grammar. Bare names are implicitly main-thread.
constexpr std::array<BaseInfo, 13> kBases{{
    {"executable", ObjectKind::static_section, false, false},
    {"env", ObjectKind::env, false, false},
    {"argv", ObjectKind::argv, false, false},
    {"shared_memory", ObjectKind::shared_memory, false, false},
    {"lib_small", ObjectKind::library, false, false},
    {"lib_big", ObjectKind::library, false, false},
    {"stack", ObjectKind::stack, true, false},
    {"stack&argv", ObjectKind::stack, true, false},
    {"heap", ObjectKind::heap, true, false},
    {"tls", ObjectKind::tls, true, false},
    {"malloc", ObjectKind::malloc_alloc, true, true},
    {"mmap_single", ObjectKind::mmap_alloc, true, true},
    {"mmap_huge", ObjectKind::mmap_alloc, true, true},
}};

const BaseInfo* find_base(std::string_view base) {
    for (const auto& info : kBases)
        if (info.base == base) return &info;
    return nullptr;
}

std::optional<ThreadId> parse_thread(std::string_view token) {
    if (token == "M") return ThreadId::M;
    if (token == "ThA") return ThreadId::ThA;
    if (token == "ThB") return ThreadId::ThB;
    return std::nullopt;
}

[[noreturn]] void fail(std::string_view name, const char* why) {
    throw MalformedName("malformed object name \"" + std::string(name) + "\": " + why);
}

} // namespace

std::string_view to_string(ObjectKind kind) {
    switch (kind) {
        case ObjectKind::static_section: return "static_section";
        case ObjectKind::stack: return "stack";
        case ObjectKind::heap: return "heap";
        case ObjectKind::tls: return "tls";
        case ObjectKind::env: return "env";
        case ObjectKind::argv: return "argv";
        case ObjectKind::shared_memory: return "shared_memory";
        case ObjectKind::library: return "library";
        case ObjectKind::malloc_alloc: return "malloc_alloc";
        case ObjectKind::mmap_alloc: return "mmap_alloc";
    }
    return "?";
}

std::string_view to_string(ThreadId thread) {
    switch (thread) {
        case ThreadId::M: return "M";
        case ThreadId::ThA: return "ThA";
        case ThreadId::ThB: return "ThB";
    }
    return "?";
}

std::uint64_t parse_size_token(std::string_view token) {
    std::uint64_t value = 0;
    const char* begin = token.data();
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr == begin) throw MalformedName("bad size token \"" + std::string(token) + "\"");
    std::string_view unit(ptr, static_cast<std::size_t>(end - ptr));
    std::uint64_t mult = 0;
    if (unit == "B") mult = 1;
    else if (unit == "KB") mult = 1024;
    else if (unit == "MB") mult = 1024ull * 1024;
    else if (unit == "GB") mult = 1024ull * 1024 * 1024;
    else throw MalformedName("bad size unit in \"" + std::string(token) + "\"");
    return value * mult;
}

std::string format_size_token(std::uint64_t bytes) {
    const std::uint64_t kb = 1024, mb = kb * 1024, gb = mb * 1024;
    if (bytes >= gb && bytes % gb == 0) return std::to_string(bytes / gb) + "GB";
    if (bytes >= mb && bytes % mb == 0) return std::to_string(bytes / mb) + "MB";
    if (bytes >= kb && bytes % kb == 0) return std::to_string(bytes / kb) + "KB";
    return std::to_string(bytes) + "B";
}

std::string ObjectKey::format() const {
    const BaseInfo* info = find_base(base);
    if (!info) throw MalformedName("unknown object base \"" + base + "\"");
    std::string name = base;
    if (info->base == "malloc") {
        if (!size_bytes) throw MalformedName("malloc key without size");
        name += '_';
        name += format_size_token(*size_bytes);
    }
    if (info->thread_suffix) {
        name += '_';
        name += to_string(thread);
    }
    if (info->dynamic) {
        if (!seq) throw MalformedName("dynamic key without sequence number");
        name += '_';
        name += std::to_string(*seq);
    }
    return name;
}

ObjectKey parse_object_key(std::string_view name) {
    if (name.empty()) throw MalformedName("empty object name");
    for (char c : name)
        if (static_cast<unsigned char>(c) > 0x7f) fail(name, "non-ASCII character");

    // Bare main-thread-only objects first ("shared_memory" contains '_').
    if (const BaseInfo* info = find_base(name); info && !info->thread_suffix)
        return ObjectKey{std::string(name), info->kind, ThreadId::M, std::nullopt, std::nullopt};

    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (pos <= name.size()) {
        std::size_t next = name.find('_', pos);
        if (next == std::string_view::npos) next = name.size();
        parts.push_back(name.substr(pos, next - pos));
        pos = next + 1;
    }
    if (parts.size() < 2) fail(name, "missing thread suffix");

    // <base>_<thread>
    if (auto thread = parse_thread(parts.back())) {
        std::string base(name.substr(0, name.size() - parts.back().size() - 1));
        const BaseInfo* info = find_base(base);
        if (!info || !info->thread_suffix || info->dynamic) fail(name, "unknown per-thread object");
        return ObjectKey{std::move(base), info->kind, *thread, std::nullopt, std::nullopt};
    }

    // <function>[_<size>]_<thread>_<seq>
    if (parts.size() >= 3) {
        std::uint32_t seq = 0;
        std::string_view seq_token = parts.back();
        auto [ptr, ec] = std::from_chars(seq_token.data(), seq_token.data() + seq_token.size(), seq);
        if (ec == std::errc{} && ptr == seq_token.data() + seq_token.size()) {
            if (auto thread = parse_thread(parts[parts.size() - 2])) {
                if (parts[0] == "malloc" && parts.size() == 4) {
                    std::uint64_t size = parse_size_token(parts[1]);
                    return ObjectKey{"malloc", ObjectKind::malloc_alloc, *thread, size, seq};
                }
                if (parts[0] == "mmap" && parts.size() == 4 && (parts[1] == "single" || parts[1] == "huge")) {
                    std::string base = std::string("mmap_") + std::string(parts[1]);
                    return ObjectKey{std::move(base), ObjectKind::mmap_alloc, *thread, std::nullopt, seq};
                }
                fail(name, "unknown allocation function");
            }
            fail(name, "unrecognized thread token");
        }
    }
    fail(name, "unrecognized thread token");
}

} // namespace aslrkit
