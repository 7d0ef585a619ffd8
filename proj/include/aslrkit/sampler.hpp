#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aslrkit {

/// One sampling campaign: n_runs executions of the collector binary, each
/// contributing one record. Every run happens in a fresh child process
/// because all the randomization in scope is decided at exec time.
struct CampaignConfig {
    std::uint64_t n_runs = 1;
    std::string output_path;
    std::vector<std::uint64_t> malloc_sizes = {16, 512, 4096, 262144, 4194304, 134217728};
    unsigned rounds = 2;
    bool include_mmap_single = true;
    bool include_mmap_huge = true;
    std::uint64_t huge_page_bytes = 2097152;

    std::string collector_path; // defaults to aslrkit-collect beside the driver
    bool disable_aslr = false;  // personality(ADDR_NO_RANDOMIZE) before exec

    void validate() const; // throws DomainError
    // The exact key set a conforming record carries (63 keys by default).
    std::vector<std::string> expected_keys() const;
};

struct CampaignSummary {
    std::uint64_t runs_ok = 0;
    std::uint64_t runs_failed = 0;
};

// Appends the header once, then one record line per successful run; the
// file is valid JSONL at any interruption point. Child crashes increment
// runs_failed and the campaign continues.
CampaignSummary collect_campaign(const CampaignConfig& config);

// Directory of the running executable (for locating sibling binaries).
std::string executable_directory();

} // namespace aslrkit
