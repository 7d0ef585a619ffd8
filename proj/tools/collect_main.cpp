// One-run address collector. Performs the allocation script on the main
// thread and two workers, then prints a single JSON record on stdout:
//   {"boot": "<boot id>", "ts": <unix>, "addr": {"<key>": "0x..."|null, ...}}
// Meant to be executed freshly per run by the campaign driver; addresses
// from a reused process would all repeat.

#include <dlfcn.h>
#include <fcntl.h>
#include <sys/mman.h>
#include <unistd.h>

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aslrkit/object_key.hpp"
#include "aslrkit/sample_set.hpp"

namespace {

using nlohmann::json;

struct Config {
    std::vector<std::uint64_t> sizes = {16, 512, 4096, 262144, 4194304, 134217728};
    unsigned rounds = 2;
    bool mmap_single = true;
    bool mmap_huge = true;
    std::uint64_t huge_bytes = 2097152;
    std::string shim_path;
};

std::mutex table_mutex;
std::map<std::string, std::uint64_t> table; // value 0 = failed allocation

void record(const std::string& key, const void* ptr) {
    std::lock_guard lock(table_mutex);
    table[key] = reinterpret_cast<std::uint64_t>(ptr);
}

thread_local char tls_marker;

// Allocation script shared by all three flows. Everything stays allocated
// until the run is over so later allocations cannot reuse the addresses.
void allocation_script(const Config& cfg, const char* thread_tag) {
    std::vector<void*> mallocs;
    std::vector<std::pair<void*, std::size_t>> mmaps;
    const std::string tag = thread_tag;
    const long page = ::sysconf(_SC_PAGESIZE);

    record("heap_" + tag, std::malloc(16));

    for (unsigned r = 1; r <= cfg.rounds; ++r) {
        for (std::uint64_t size : cfg.sizes) {
            void* p = std::malloc(size);
            mallocs.push_back(p);
            record("malloc_" + aslrkit::format_size_token(size) + "_" + tag + "_" + std::to_string(r), p);
        }
        if (cfg.mmap_single) {
            void* p = ::mmap(nullptr, static_cast<std::size_t>(page), PROT_READ | PROT_WRITE,
                             MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
            if (p == MAP_FAILED) p = nullptr;
            mmaps.emplace_back(p, page);
            record("mmap_single_" + tag + "_" + std::to_string(r), p);
        }
        if (cfg.mmap_huge) {
            void* p = ::mmap(nullptr, cfg.huge_bytes, PROT_READ | PROT_WRITE,
                             MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
            if (p == MAP_FAILED) p = nullptr;
            mmaps.emplace_back(p, cfg.huge_bytes);
            record("mmap_huge_" + tag + "_" + std::to_string(r), p);
        }
    }

    int stack_marker = 0;
    record("stack_" + tag, &stack_marker);
    record("tls_" + tag, &tls_marker);

    for (void* p : mallocs) std::free(p);
    for (auto [p, len] : mmaps)
        if (p) ::munmap(p, len);
}

// A function in the program image; one section pins the whole contiguous
// ELF layout.
void executable_marker() {}

void collect_main_only(const Config& cfg, char** argv, char** envp) {
    record("executable", reinterpret_cast<void*>(&executable_marker));
    record("argv", argv[0]);
    record("env", envp && envp[0] ? envp[0] : nullptr);

    {
        char name[64];
        std::snprintf(name, sizeof name, "/aslrkit-%d", ::getpid());
        void* p = nullptr;
        int fd = ::shm_open(name, O_CREAT | O_EXCL | O_RDWR, 0600);
        if (fd >= 0) {
            const long page = ::sysconf(_SC_PAGESIZE);
            if (::ftruncate(fd, page) == 0) {
                p = ::mmap(nullptr, static_cast<std::size_t>(page), PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
                if (p == MAP_FAILED) p = nullptr;
            }
            ::close(fd);
            ::shm_unlink(name);
        }
        record("shared_memory", p);
    }

    // lib_big: any symbol the executable does not define resolves into the
    // C library.
    record("lib_big", ::dlsym(RTLD_DEFAULT, "qsort"));

    void* shim = ::dlopen(cfg.shim_path.c_str(), RTLD_NOW | RTLD_LOCAL);
    record("lib_small", shim ? ::dlsym(shim, "aslrkit_shim_marker") : nullptr);
}

std::string boot_id() {
    std::ifstream in("/proc/sys/kernel/random/boot_id");
    std::string id;
    if (in && std::getline(in, id) && !id.empty()) return id;
    return "unknown";
}

std::string own_directory() {
    char buf[4096];
    ssize_t n = ::readlink("/proc/self/exe", buf, sizeof buf - 1);
    if (n <= 0) return ".";
    buf[n] = '\0';
    std::string path(buf);
    auto slash = path.find_last_of('/');
    return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

} // namespace

int main(int argc, char** argv, char** envp) {
    Config cfg;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&]() -> std::string { return i + 1 < argc ? argv[++i] : ""; };
        if (arg == "--rounds") {
            cfg.rounds = static_cast<unsigned>(std::strtoul(next().c_str(), nullptr, 10));
        } else if (arg == "--sizes") {
            cfg.sizes.clear();
            std::string csv = next();
            std::size_t pos = 0;
            while (pos < csv.size()) {
                std::size_t comma = csv.find(',', pos);
                if (comma == std::string::npos) comma = csv.size();
                cfg.sizes.push_back(std::strtoull(csv.substr(pos, comma - pos).c_str(), nullptr, 10));
                pos = comma + 1;
            }
        } else if (arg == "--huge-bytes") {
            cfg.huge_bytes = std::strtoull(next().c_str(), nullptr, 10);
        } else if (arg == "--no-single") {
            cfg.mmap_single = false;
        } else if (arg == "--no-huge") {
            cfg.mmap_huge = false;
        } else if (arg == "--shim") {
            cfg.shim_path = next();
        } else {
            std::fprintf(stderr, "unknown flag %s\n", arg.c_str());
            return 2;
        }
    }
    if (cfg.rounds < 1 || cfg.sizes.empty()) {
        std::fprintf(stderr, "bad configuration\n");
        return 2;
    }
    if (cfg.shim_path.empty()) cfg.shim_path = own_directory() + "/libaslrkit_shim.so";

    std::thread tha(allocation_script, std::cref(cfg), "ThA");
    std::thread thb(allocation_script, std::cref(cfg), "ThB");
    allocation_script(cfg, "M");
    collect_main_only(cfg, argv, envp);
    tha.join();
    thb.join();

    json addr = json::object();
    for (const auto& [key, value] : table) {
        if (value == 0)
            addr[key] = nullptr;
        else
            addr[key] = aslrkit::format_address(value);
    }
    json rec;
    rec["boot"] = boot_id();
    rec["ts"] = static_cast<std::int64_t>(::time(nullptr));
    rec["addr"] = std::move(addr);
    std::printf("%s\n", rec.dump().c_str());
    return 0;
}
