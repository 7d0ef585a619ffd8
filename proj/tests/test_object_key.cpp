#include <doctest.h>

#include "aslrkit/errors.hpp"
#include "aslrkit/object_key.hpp"

using namespace aslrkit;

TEST_CASE("stack_M parses to a main-thread stack key") {
    const ObjectKey key = parse_object_key("stack_M");
    CHECK(key.kind == ObjectKind::stack);
    CHECK(key.thread == ThreadId::M);
    CHECK_FALSE(key.size_bytes.has_value());
    CHECK_FALSE(key.seq.has_value());
    CHECK(key.format() == "stack_M");
}

TEST_CASE("malloc_4KB_ThB_2 carries size, thread and sequence") {
    const ObjectKey key = parse_object_key("malloc_4KB_ThB_2");
    CHECK(key.kind == ObjectKind::malloc_alloc);
    CHECK(key.thread == ThreadId::ThB);
    CHECK(key.size_bytes == 4096);
    CHECK(key.seq == 2);
    CHECK(key.format() == "malloc_4KB_ThB_2");
}

TEST_CASE("unknown thread token is malformed") {
    CHECK_THROWS_AS(parse_object_key("stack_Q"), MalformedName);
    CHECK_THROWS_AS(parse_object_key(""), MalformedName);
    CHECK_THROWS_AS(parse_object_key("malloc_4KB_2"), MalformedName);
    CHECK_THROWS_AS(parse_object_key("malloc_4XB_ThB_2"), MalformedName);
    CHECK_THROWS_AS(parse_object_key("calloc_4KB_ThB_2"), MalformedName);
    CHECK_THROWS_AS(parse_object_key("mmap_large_M_1"), MalformedName);
}

TEST_CASE("bare main-thread objects have no suffix") {
    for (const char* name : {"env", "argv", "shared_memory", "executable", "lib_small", "lib_big"}) {
        const ObjectKey key = parse_object_key(name);
        CHECK(key.thread == ThreadId::M);
        CHECK(key.format() == name);
    }
    CHECK(parse_object_key("executable").kind == ObjectKind::static_section);
    CHECK(parse_object_key("lib_small").kind == ObjectKind::library);
    CHECK(parse_object_key("shared_memory").kind == ObjectKind::shared_memory);
}

TEST_CASE("thread suffix in the name agrees with the thread field") {
    CHECK(parse_object_key("tls_ThA").thread == ThreadId::ThA);
    CHECK(parse_object_key("heap_ThB").thread == ThreadId::ThB);
    CHECK(parse_object_key("stack&argv_M").kind == ObjectKind::stack);
    CHECK(parse_object_key("mmap_huge_ThA_1").kind == ObjectKind::mmap_alloc);
}

TEST_CASE("every sampler and simulator name round-trips") {
    const char* names[] = {
        "stack_M", "stack_ThA", "stack_ThB", "stack&argv_M", "heap_M", "heap_ThA", "heap_ThB",
        "tls_M", "tls_ThA", "tls_ThB", "env", "argv", "shared_memory", "executable",
        "lib_small", "lib_big", "malloc_16B_M_1", "malloc_512B_ThA_2", "malloc_4KB_ThB_1",
        "malloc_256KB_M_2", "malloc_4MB_ThA_1", "malloc_128MB_ThB_2", "mmap_single_M_1",
        "mmap_single_ThA_2", "mmap_huge_ThB_1",
    };
    for (const char* name : names) CHECK(parse_object_key(name).format() == name);
}

TEST_CASE("size tokens map between bytes and suffixes") {
    CHECK(parse_size_token("16B") == 16);
    CHECK(parse_size_token("512B") == 512);
    CHECK(parse_size_token("4KB") == 4096);
    CHECK(parse_size_token("256KB") == 262144);
    CHECK(parse_size_token("4MB") == 4194304);
    CHECK(parse_size_token("128MB") == 134217728);
    for (std::uint64_t bytes : {16ull, 512ull, 4096ull, 262144ull, 4194304ull, 134217728ull})
        CHECK(parse_size_token(format_size_token(bytes)) == bytes);
    CHECK(format_size_token(1536) == "1536B"); // not a clean KB multiple
}
