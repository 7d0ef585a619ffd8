// aslrkit: sample, synthesize, and analyze ASLR address layouts.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "aslrkit/errors.hpp"
#include "aslrkit/policy.hpp"
#include "aslrkit/report.hpp"
#include "aslrkit/sample_set.hpp"
#include "aslrkit/sampler.hpp"

namespace {

using namespace aslrkit;

unsigned default_jobs() {
    if (const char* env = std::getenv("ASLRKIT_JOBS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

// Config file < flags. CLI11 already applied defaults, so only fields the
// user did not pass on the command line are overwritten.
void apply_config_file(const std::string& path, CLI::App* cmd, std::string& estimator, double& tps,
                       double& alphabet_bits, unsigned& jobs, std::string& out_dir) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad config file " + path + ": " + e.what());
    }
    auto unset = [&](const char* flag) { return cmd->count(flag) == 0; };
    if (j.contains("estimator") && unset("--estimator")) estimator = j["estimator"].get<std::string>();
    if (j.contains("tps") && unset("--tps")) tps = j["tps"].get<double>();
    if (j.contains("alphabet_override_bits") && unset("--alphabet-bits"))
        alphabet_bits = j["alphabet_override_bits"].get<double>();
    if (j.contains("jobs") && unset("--jobs")) jobs = j["jobs"].get<unsigned>();
    if (j.contains("out_dir") && unset("--out-dir")) out_dir = j["out_dir"].get<std::string>();
}

AnalysisReport run_analysis(const std::string& input, const std::string& estimator, double tps,
                            double alphabet_bits, unsigned jobs) {
    SampleSet set = load_sample_set_file(input);
    AnalyzeOptions options;
    if (estimator == "nsb")
        options.estimator = EstimatorMethod::nsb;
    else if (estimator == "plugin")
        options.estimator = EstimatorMethod::plugin;
    else
        throw DomainError("unknown estimator \"" + estimator + "\" (expected nsb or plugin)");
    options.tps = tps;
    if (alphabet_bits > 0) options.alphabet_override_bits = alphabet_bits;
    options.jobs = jobs;
    return analyze(set, options);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ASLR randomization measurement and analysis toolkit"};
    app.require_subcommand(1);

    // --- sample ---
    auto* sample = app.add_subcommand("sample", "collect live address samples (Linux)");
    CampaignConfig campaign;
    std::string sizes_csv;
    sample->add_option("--runs", campaign.n_runs, "number of runs")->required();
    sample->add_option("--out", campaign.output_path, "output JSONL file")->required();
    sample->add_option("--rounds", campaign.rounds, "allocation rounds per thread (default 2)");
    sample->add_option("--sizes", sizes_csv, "malloc sizes in bytes, comma separated");
    sample->add_flag("--no-huge", [&campaign](std::int64_t) { campaign.include_mmap_huge = false; },
                     "skip huge-sized mmap allocations");
    sample->add_option("--collector", campaign.collector_path, "path to the aslrkit-collect binary");
    sample->add_flag("--no-aslr", campaign.disable_aslr,
                     "disable layout randomization in the child (self-test)");

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate samples from a policy model");
    std::string policy_arg, synth_out;
    std::uint64_t synth_runs = 0, synth_seed = 0;
    synth->add_option("--policy", policy_arg, "builtin policy name or JSON file")->required();
    synth->add_option("--runs", synth_runs, "number of records")->required();
    synth->add_option("--out", synth_out, "output JSONL file")->required();
    synth->add_option("--seed", synth_seed, "RNG seed (default 0)");

    // --- analyze / report ---
    std::string input, out_dir, estimator = "nsb", config_file;
    double tps = 300.0, alphabet_bits = 0.0;
    unsigned jobs = default_jobs();
    auto add_analysis_flags = [&](CLI::App* cmd, bool out_required) {
        cmd->add_option("--input", input, "sample JSONL file")->required();
        auto* o = cmd->add_option("--out-dir", out_dir, "artifact directory");
        if (out_required) o->required();
        cmd->add_option("--estimator", estimator, "nsb (default) or plugin");
        cmd->add_option("--tps", tps, "attacker tries per second (default 300)");
        cmd->add_option("--alphabet-bits", alphabet_bits, "override NSB alphabet size (log2)");
        cmd->add_option("--jobs", jobs, "worker threads (default: ASLRKIT_JOBS or hardware)");
        cmd->add_option("--config", config_file, "JSON config file (flags win)");
    };
    auto* analyze_cmd = app.add_subcommand("analyze", "compute entropies, matrix, findings; write artifacts");
    add_analysis_flags(analyze_cmd, true);
    auto* report_cmd = app.add_subcommand("report", "print the text report (optionally writing artifacts)");
    add_analysis_flags(report_cmd, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sample->parsed()) {
            if (!sizes_csv.empty()) {
                campaign.malloc_sizes.clear();
                std::stringstream ss(sizes_csv);
                std::string tok;
                while (std::getline(ss, tok, ','))
                    campaign.malloc_sizes.push_back(std::strtoull(tok.c_str(), nullptr, 10));
            }
            const CampaignSummary summary = collect_campaign(campaign);
            std::fprintf(stderr, "runs_ok=%llu runs_failed=%llu\n",
                         static_cast<unsigned long long>(summary.runs_ok),
                         static_cast<unsigned long long>(summary.runs_failed));
            return summary.runs_failed == 0 ? 0 : 1;
        }

        if (synth->parsed()) {
            PolicySpec policy = std::filesystem::exists(policy_arg) ? load_policy_file(policy_arg)
                                                                    : builtin_policy(policy_arg);
            policy.seed = synth_seed;
            SampleSet set = generate(policy, synth_runs);
            save_sample_set_file(set, synth_out);
            std::fprintf(stderr, "wrote %llu records to %s\n",
                         static_cast<unsigned long long>(set.record_count()), synth_out.c_str());
            return 0;
        }

        CLI::App* cmd = analyze_cmd->parsed() ? analyze_cmd : report_cmd;
        if (!config_file.empty())
            apply_config_file(config_file, cmd, estimator, tps, alphabet_bits, jobs, out_dir);
        AnalysisReport report = run_analysis(input, estimator, tps, alphabet_bits, jobs);
        if (!out_dir.empty()) write_all_artifacts(report, out_dir);
        if (report_cmd->parsed()) std::cout << render_text_report(report);
        return report.has_critical_finding() ? 2 : 0;
    } catch (const Error& e) {
        std::fprintf(stderr, "aslrkit: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "aslrkit: unexpected error: %s\n", e.what());
        return 1;
    }
}
