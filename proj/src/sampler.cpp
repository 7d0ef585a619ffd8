#include "aslrkit/sampler.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "aslrkit/errors.hpp"
#include "aslrkit/object_key.hpp"
#include "aslrkit/sample_set.hpp"

#ifdef __linux__
#include <sys/personality.h>
#include <sys/utsname.h>
#include <sys/wait.h>
#include <unistd.h>
#include <limits.h>
#endif

namespace aslrkit {

using nlohmann::json;

void CampaignConfig::validate() const {
    if (n_runs < 1) throw DomainError("campaign needs n_runs >= 1");
    if (rounds < 1) throw DomainError("campaign needs rounds >= 1");
    if (output_path.empty()) throw DomainError("campaign needs an output path");
    if (malloc_sizes.empty()) throw DomainError("campaign needs at least one malloc size");
    for (std::size_t i = 1; i < malloc_sizes.size(); ++i)
        if (malloc_sizes[i] <= malloc_sizes[i - 1])
            throw DomainError("malloc sizes must be strictly increasing");
    if (include_mmap_huge && huge_page_bytes < 4096)
        throw DomainError("huge mapping smaller than a page");
}

std::vector<std::string> CampaignConfig::expected_keys() const {
    std::vector<std::string> keys{"env", "argv", "shared_memory", "executable", "lib_small", "lib_big"};
    for (const char* t : {"M", "ThA", "ThB"}) {
        keys.push_back(std::string("stack_") + t);
        keys.push_back(std::string("tls_") + t);
        keys.push_back(std::string("heap_") + t);
        for (unsigned r = 1; r <= rounds; ++r) {
            for (std::uint64_t size : malloc_sizes)
                keys.push_back("malloc_" + format_size_token(size) + "_" + t + "_" + std::to_string(r));
            if (include_mmap_single)
                keys.push_back(std::string("mmap_single_") + t + "_" + std::to_string(r));
            if (include_mmap_huge)
                keys.push_back(std::string("mmap_huge_") + t + "_" + std::to_string(r));
        }
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

#ifdef __linux__

std::string executable_directory() {
    char buf[PATH_MAX];
    ssize_t n = ::readlink("/proc/self/exe", buf, sizeof buf - 1);
    if (n <= 0) return ".";
    buf[n] = '\0';
    std::string path(buf);
    auto slash = path.find_last_of('/');
    return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

namespace {

std::string read_first_line(const char* path) {
    std::ifstream in(path);
    std::string line;
    if (in && std::getline(in, line)) return line;
    return {};
}

// Runs the collector once, capturing its single JSON line. Returns empty
// on spawn or child failure.
std::string run_collector(const CampaignConfig& config, const std::vector<std::string>& args) {
    int fds[2];
    if (::pipe(fds) != 0) throw SpawnFailure("pipe failed");
    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        throw SpawnFailure("fork failed");
    }
    if (pid == 0) {
        ::close(fds[0]);
        ::dup2(fds[1], 1);
        ::close(fds[1]);
        if (config.disable_aslr && ::personality(ADDR_NO_RANDOMIZE) == -1) _exit(97);
        std::vector<char*> argv;
        argv.push_back(const_cast<char*>(config.collector_path.c_str()));
        for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        ::execv(config.collector_path.c_str(), argv.data());
        _exit(98);
    }
    ::close(fds[1]);
    std::string output;
    char buf[4096];
    ssize_t n;
    while ((n = ::read(fds[0], buf, sizeof buf)) > 0) output.append(buf, static_cast<std::size_t>(n));
    ::close(fds[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {};
    return output;
}

} // namespace

CampaignSummary collect_campaign(const CampaignConfig& config_in) {
    CampaignConfig config = config_in;
    config.validate();
    if (config.collector_path.empty()) config.collector_path = executable_directory() + "/aslrkit-collect";

    struct utsname uts{};
    ::uname(&uts);

    // The reference methodology records the kernel's randomization level;
    // containers often hide the sysctl, in which case we record "unreadable"
    // and proceed.
    std::string rva = read_first_line("/proc/sys/kernel/randomize_va_space");
    if (rva.empty()) rva = "unreadable";

    json header;
    header["schema"] = "aslr-samples/1";
    header["os"] = "linux";
    header["arch"] = uts.machine;
    header["kernel"] = uts.release;
    header["page_size"] = static_cast<std::uint64_t>(::sysconf(_SC_PAGESIZE));
    header["source"] = "live";
    header["randomize_va_space"] = rva;
    header["shared_memory_kind"] = "posix";

    std::ofstream out(config.output_path, std::ios::binary);
    if (!out) throw IoError("cannot open " + config.output_path + " for writing");
    out << header.dump() << '\n';

    std::vector<std::string> args{"--rounds", std::to_string(config.rounds), "--huge-bytes",
                                  std::to_string(config.huge_page_bytes)};
    {
        std::string csv;
        for (std::size_t i = 0; i < config.malloc_sizes.size(); ++i) {
            if (i) csv += ',';
            csv += std::to_string(config.malloc_sizes[i]);
        }
        args.push_back("--sizes");
        args.push_back(csv);
    }
    if (!config.include_mmap_single) args.push_back("--no-single");
    if (!config.include_mmap_huge) args.push_back("--no-huge");

    const auto expected = config.expected_keys();
    CampaignSummary summary;
    for (std::uint64_t run = 0; run < config.n_runs; ++run) {
        std::string line;
        try {
            line = run_collector(config, args);
        } catch (const SpawnFailure&) {
            ++summary.runs_failed;
            continue;
        }
        if (line.empty()) {
            ++summary.runs_failed;
            continue;
        }
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception&) {
            ++summary.runs_failed;
            continue;
        }
        if (!rec.contains("addr") || !rec["addr"].is_object() || rec["addr"].size() != expected.size()) {
            ++summary.runs_failed;
            continue;
        }
        bool ok = true;
        for (const auto& key : expected) {
            auto it = rec["addr"].find(key);
            if (it == rec["addr"].end()) { ok = false; break; }
            if (it->is_null()) continue;
            try {
                if (parse_address(it->get<std::string>()) >> 63) { ok = false; break; }
            } catch (const Error&) {
                ok = false;
                break;
            }
        }
        if (!ok) {
            ++summary.runs_failed;
            continue;
        }
        json out_rec;
        out_rec["boot"] = rec.value("boot", "unknown");
        out_rec["run"] = run;
        out_rec["ts"] = rec.value("ts", 0);
        out_rec["addr"] = rec["addr"];
        out << out_rec.dump() << '\n';
        out.flush();
        ++summary.runs_ok;
    }
    if (!out) throw IoError("write failed for " + config.output_path);
    return summary;
}

#else // !__linux__

std::string executable_directory() { return "."; }

CampaignSummary collect_campaign(const CampaignConfig&) {
    throw SpawnFailure("live sampling is only implemented for Linux");
}

#endif

} // namespace aslrkit
