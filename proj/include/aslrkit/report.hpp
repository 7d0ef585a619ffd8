#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aslrkit/analysis.hpp"
#include "aslrkit/attack_cost.hpp"
#include "aslrkit/sample_set.hpp"

namespace aslrkit {

struct AnalyzeOptions {
    EstimatorMethod estimator = EstimatorMethod::nsb;
    double tps = 300.0;
    std::optional<double> alphabet_override_bits;
    unsigned jobs = 1;
};

struct GroupReport {
    ObjectGroup group;
    RandomizationClass classification = RandomizationClass::indeterminate;
    unsigned alignment_bits = 0;          // observed on the representative
    Bitmask bitmask;                      // scope: all records
    std::optional<EntropyEstimate> entropy;
    std::uint64_t min_samples_5pct = 0;   // for the estimated bits
    bool sufficient = false;              // n_samples >= min_samples_5pct
    std::optional<Histogram> histogram;
    std::string histogram_note;           // reason when absent
};

struct AnalysisReport {
    Platform platform;
    std::optional<std::string> policy_fingerprint;
    std::size_t n_records = 0;
    std::size_t n_boots = 0;
    AnalyzeOptions options;
    std::vector<std::string> excluded;    // objects with null addresses
    std::vector<GroupReport> groups;
    std::vector<RandomizationClass> object_classes; // parallel to object_names
    std::vector<std::string> object_names;
    std::vector<AddressRange> ranges;
    DistanceEntropyMatrix matrix;
    std::vector<Finding> findings;

    bool has_critical_finding() const;
};

AnalysisReport analyze(const SampleSet& set, const AnalyzeOptions& options);

// Deterministic artifact writers; identical inputs produce identical bytes.
void write_report_json(const AnalysisReport& report, const std::string& path);
void write_findings_json(const AnalysisReport& report, const std::string& path);
void write_matrix_csv(const AnalysisReport& report, const std::string& path);
void write_histograms_csv(const AnalysisReport& report, const std::string& path);
void write_ranges_csv(const AnalysisReport& report, const std::string& path);
std::string render_text_report(const AnalysisReport& report);

// Runs the full export set into out_dir (created if needed).
void write_all_artifacts(const AnalysisReport& report, const std::string& out_dir);

} // namespace aslrkit
