#include "aslrkit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aslrkit/errors.hpp"

namespace aslrkit {

namespace {

using nlohmann::json;

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::string fmt_bits(double v) { return fmt("%.3f", v); }

std::string fmt_seconds(double s) {
    char buf[64];
    if (s < 120) {
        std::snprintf(buf, sizeof buf, "%.1f s", s);
    } else if (s < 7200) {
        std::snprintf(buf, sizeof buf, "%.1f min", s / 60);
    } else if (s < 172800) {
        std::snprintf(buf, sizeof buf, "%.1f h", s / 3600);
    } else {
        std::snprintf(buf, sizeof buf, "%.1f days", s / 86400);
    }
    return buf;
}

std::string fmt_attempts(double a) {
    char buf[64];
    if (a < 1e15)
        std::snprintf(buf, sizeof buf, "%.0f", a);
    else
        std::snprintf(buf, sizeof buf, "%.3e", a);
    return buf;
}

json estimate_json(const EntropyEstimate& e) {
    json j;
    j["method"] = method_name(e.method);
    j["bits"] = fmt_bits(e.bits);
    j["posterior_std_bits"] = fmt_bits(e.posterior_std_bits);
    j["n_samples"] = e.n_samples;
    j["alphabet_log2"] = fmt_bits(e.alphabet_log2);
    j["bias_bound"] = fmt("%.6f", e.bias_bound);
    j["low_confidence"] = e.low_confidence;
    j["scope"] = e.scope == EstimateScope::per_boot ? "per_boot" : "per_record";
    return j;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

} // namespace

bool AnalysisReport::has_critical_finding() const {
    for (const auto& f : findings)
        if (f.tier == WeaknessTier::critical) return true;
    return false;
}

AnalysisReport analyze(const SampleSet& set, const AnalyzeOptions& options) {
    set.validate();

    AnalysisReport report;
    report.platform = set.platform;
    report.policy_fingerprint = set.policy_fingerprint;
    report.n_records = set.record_count();
    report.n_boots = set.boot_ids().size();
    report.options = options;

    const auto boot_of = set.boot_of_records();
    for (std::size_t k = 0; k < set.keys().size(); ++k)
        if (set.null_count(k) > 0) report.excluded.push_back(set.keys()[k]);

    report.ranges = layout_ranges(set);
    const auto groups = group_contiguous(set);

    report.object_names = set.keys();
    report.object_classes.resize(set.keys().size(), RandomizationClass::indeterminate);
    for (std::size_t k = 0; k < set.keys().size(); ++k) {
        if (set.null_count(k) > 0) continue;
        report.object_classes[k] = classify(set.column(k), boot_of);
    }

    EstimatorConfig cfg;
    cfg.method = options.estimator;
    cfg.alphabet_override_bits = options.alphabet_override_bits;
    cfg.jobs = options.jobs;
    report.matrix = distance_matrix(set, groups, cfg);

    report.groups.resize(groups.size());
    parallel_for(groups.size(), options.jobs, [&](std::size_t gi) {
        GroupReport gr;
        gr.group = groups[gi];
        const std::size_t key = set.key_index(gr.group.representative);
        std::vector<std::uint64_t> col = set.column(key);
        gr.classification = classify(col, boot_of);

        const unsigned align = observed_alignment_bits(col);
        gr.alignment_bits = align == 64 ? 0 : align;
        NormalizedSeries series =
            normalize(ObjectKey{}, col, gr.alignment_bits, true, boot_of, set.boot_ids());
        gr.bitmask = changing_bitmask(series, BitmaskScope::all);

        gr.entropy = report.matrix.at(gi, gi).estimate;
        if (gr.entropy) {
            gr.min_samples_5pct = min_samples(gr.entropy->bits, 0.05);
            gr.sufficient = gr.entropy->n_samples >= gr.min_samples_5pct;
        }

        // Histograms follow the estimation scope: boot-scoped objects are
        // plotted from per-boot samples.
        std::vector<std::uint64_t> hist_col = col;
        if (gr.entropy && gr.entropy->scope == EstimateScope::per_boot) {
            hist_col.clear();
            std::uint32_t seen = ~0u;
            for (std::size_t i = 0; i < col.size(); ++i) {
                if (i == 0 || boot_of[i] != seen) hist_col.push_back(col[i]);
                seen = boot_of[i];
            }
        }
        try {
            gr.histogram = histogram(hist_col);
        } catch (const DegenerateRange&) {
            gr.histogram_note = "degenerate: constant address";
        } catch (const EmptySeries&) {
            gr.histogram_note = "fewer than 100 samples";
        }
        report.groups[gi] = std::move(gr);
    });

    std::vector<RandomizationClass> rep_classes;
    rep_classes.reserve(report.groups.size());
    for (const auto& g : report.groups) rep_classes.push_back(g.classification);
    report.findings = rank_weaknesses(report.matrix, rep_classes, ThreatModel{options.tps});
    return report;
}

void write_report_json(const AnalysisReport& report, const std::string& path) {
    json j;
    j["schema"] = "aslr-analysis/1";
    j["platform"] = {{"os", report.platform.os},
                     {"arch", report.platform.arch},
                     {"kernel", report.platform.kernel_version},
                     {"page_size", report.platform.page_size_bytes},
                     {"source", report.platform.source == SampleSource::live ? "live" : "synthetic"}};
    if (report.policy_fingerprint) j["policy_fingerprint"] = *report.policy_fingerprint;
    j["n_records"] = report.n_records;
    j["n_boots"] = report.n_boots;
    j["estimator"] = method_name(report.options.estimator);
    j["tps"] = report.options.tps;
    j["excluded"] = report.excluded;

    j["objects"] = json::array();
    for (std::size_t k = 0; k < report.object_names.size(); ++k) {
        json jo;
        jo["name"] = report.object_names[k];
        jo["class"] = to_string(report.object_classes[k]);
        for (const auto& g : report.groups)
            for (const auto& m : g.group.members)
                if (m == report.object_names[k]) jo["group"] = g.group.representative;
        j["objects"].push_back(std::move(jo));
    }

    j["groups"] = json::array();
    for (const auto& g : report.groups) {
        json jg;
        jg["representative"] = g.group.representative;
        jg["members"] = g.group.members;
        json offs = json::array();
        for (std::int64_t o : g.group.offsets) offs.push_back(o);
        jg["offsets"] = std::move(offs);
        jg["class"] = to_string(g.classification);
        jg["alignment_bits"] = g.alignment_bits;
        jg["bitmask"] = format_address(g.bitmask.mask);
        jg["bitmask_bits"] = g.bitmask.bit_count;
        if (g.entropy) jg["entropy"] = estimate_json(*g.entropy);
        jg["min_samples_5pct"] = g.min_samples_5pct;
        jg["sufficient"] = g.sufficient;
        if (g.histogram) {
            jg["histogram_uniform"] = g.histogram->uniform_verdict;
            jg["histogram_chi_square"] = fmt("%.3f", g.histogram->chi_square);
            jg["histogram_p_value"] = fmt("%.6g", g.histogram->p_value);
            jg["histogram_max_deviation"] = fmt("%.6f", g.histogram->max_deviation);
        } else {
            jg["histogram_note"] = g.histogram_note;
        }
        j["groups"].push_back(std::move(jg));
    }

    j["matrix"] = json::array();
    const std::size_t n = report.matrix.labels.size();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const auto& cell = report.matrix.at(r, c);
            json jc;
            jc["row"] = cell.row;
            jc["col"] = cell.col;
            if (cell.estimate) jc["estimate"] = estimate_json(*cell.estimate);
            if (!cell.flags.empty()) jc["flags"] = cell.flags;
            j["matrix"].push_back(std::move(jc));
        }
    }

    j["findings"] = json::array();
    for (const auto& f : report.findings) {
        json jf;
        jf["kind"] = f.kind == FindingKind::absolute ? "absolute" : "correlation_path";
        jf["object"] = f.object;
        if (!f.pair_other.empty()) jf["pair"] = f.pair_other;
        jf["bits"] = fmt_bits(f.bits);
        jf["tier"] = to_string(f.tier);
        jf["attempts"] = fmt_attempts(f.cost.attempts);
        jf["seconds_at_tps"] = fmt("%.3f", f.cost.seconds);
        if (!f.notes.empty()) jf["notes"] = f.notes;
        j["findings"].push_back(std::move(jf));
    }

    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

void write_findings_json(const AnalysisReport& report, const std::string& path) {
    json arr = json::array();
    for (const auto& f : report.findings) {
        json jf;
        jf["kind"] = f.kind == FindingKind::absolute ? "absolute" : "correlation_path";
        jf["object"] = f.object;
        if (!f.pair_other.empty()) jf["pair"] = f.pair_other;
        jf["bits"] = fmt_bits(f.bits);
        jf["tier"] = to_string(f.tier);
        jf["attempts"] = fmt_attempts(f.cost.attempts);
        jf["seconds_at_tps"] = fmt("%.3f", f.cost.seconds);
        jf["notes"] = f.notes;
        arr.push_back(std::move(jf));
    }
    auto out = open_out(path);
    out << arr.dump(2) << '\n';
}

void write_matrix_csv(const AnalysisReport& report, const std::string& path) {
    auto out = open_out(path);
    out << "row,col,bits,std,method,flags\n";
    const std::size_t n = report.matrix.labels.size();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const auto& cell = report.matrix.at(r, c);
            out << cell.row << ',' << cell.col << ',';
            if (cell.estimate)
                out << fmt_bits(cell.estimate->bits) << ',' << fmt_bits(cell.estimate->posterior_std_bits)
                    << ',' << method_name(cell.estimate->method);
            else
                out << ",,";
            out << ',' << cell.flags << '\n';
        }
    }
}

void write_histograms_csv(const AnalysisReport& report, const std::string& path) {
    auto out = open_out(path);
    out << "object,bin_lo,bin_hi,count,probability\n";
    for (const auto& g : report.groups) {
        if (!g.histogram) continue;
        const auto& h = *g.histogram;
        const double width = static_cast<double>(h.hi - h.lo) / Histogram::kBins;
        for (unsigned i = 0; i < Histogram::kBins; ++i) {
            const auto lo = static_cast<std::uint64_t>(static_cast<double>(h.lo) + width * i);
            const auto hi = i + 1 == Histogram::kBins
                                ? h.hi
                                : static_cast<std::uint64_t>(static_cast<double>(h.lo) + width * (i + 1));
            out << g.group.representative << ',' << format_address(lo) << ',' << format_address(hi) << ','
                << h.counts[i] << ',' << fmt("%.8f", h.probabilities[i]) << '\n';
        }
    }
}

void write_ranges_csv(const AnalysisReport& report, const std::string& path) {
    auto out = open_out(path);
    out << "object,min,max\n";
    for (const auto& r : report.ranges)
        out << r.object << ',' << format_address(r.min) << ',' << format_address(r.max) << '\n';
}

std::string render_text_report(const AnalysisReport& report) {
    std::ostringstream out;
    out << "ASLR randomization report\n";
    out << "platform: " << report.platform.os << '/' << report.platform.arch << " kernel "
        << report.platform.kernel_version << " page_size " << report.platform.page_size_bytes
        << (report.platform.source == SampleSource::live ? " (live)" : " (synthetic)") << '\n';
    out << "records: " << report.n_records << "  boots: " << report.n_boots
        << "  estimator: " << method_name(report.options.estimator) << "  tps: " << report.options.tps
        << "\n\n";

    if (!report.excluded.empty()) {
        out << "excluded (missing addresses):";
        for (const auto& name : report.excluded) out << ' ' << name;
        out << "\n\n";
    }

    out << "GROUPS (absolute entropy per representative)\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-24s %7s %-15s %9s %7s %5s %9s %11s %-22s %s\n", "representative",
                  "members", "class", "bits", "std", "mask", "n", "min_n(5%)", "sufficiency", "tier");
    out << line;
    for (const auto& g : report.groups) {
        const double bits = g.entropy ? g.entropy->bits : 0.0;
        const double std_bits = g.entropy ? g.entropy->posterior_std_bits : 0.0;
        const std::size_t n = g.entropy ? g.entropy->n_samples : 0;
        std::snprintf(line, sizeof line, "%-24s %7zu %-15s %9.3f %7.3f %5u %9zu %11llu %-22s %s\n",
                      g.group.representative.c_str(), g.group.members.size(),
                      to_string(g.classification), bits, std_bits, g.bitmask.bit_count, n,
                      static_cast<unsigned long long>(g.min_samples_5pct),
                      g.sufficient ? "ok" : "insufficient (bias>5%)",
                      to_string(tier_for_bits(bits)));
        out << line;
    }
    out << '\n';

    const std::size_t n = report.matrix.labels.size();
    out << "DISTANCE ENTROPY MATRIX (bits; diagonal = absolute entropy)\n";
    out << "            ";
    for (const auto& label : report.matrix.labels) {
        std::snprintf(line, sizeof line, " %11.11s", label.c_str());
        out << line;
    }
    out << '\n';
    for (std::size_t r = 0; r < n; ++r) {
        std::snprintf(line, sizeof line, "%-12.12s", report.matrix.labels[r].c_str());
        out << line;
        for (std::size_t c = 0; c < n; ++c) {
            const auto& cell = report.matrix.at(r, c);
            if (cell.estimate)
                std::snprintf(line, sizeof line, " %11.3f", cell.estimate->bits);
            else
                std::snprintf(line, sizeof line, " %11s", "-");
            out << line;
        }
        out << '\n';
    }
    out << '\n';

    out << "FINDINGS (worst first)\n";
    if (report.findings.empty()) out << "none: every group is strong (>= 30 bits) and uncorrelated\n";
    std::size_t idx = 1;
    for (const auto& f : report.findings) {
        out << idx++ << ". [" << to_string(f.tier) << "] ";
        if (f.kind == FindingKind::absolute)
            out << f.object << ": absolute entropy " << fmt_bits(f.bits) << " bits";
        else
            out << '(' << f.object << ", " << f.pair_other << "): correlation path " << fmt_bits(f.bits)
                << " bits";
        out << " -> " << fmt_attempts(f.cost.attempts) << " attempts, " << fmt_seconds(f.cost.seconds)
            << " at " << report.options.tps << " tps";
        if (!f.notes.empty()) out << " (" << f.notes << ')';
        out << '\n';
    }
    out << '\n';

    out << "sample-size reference (bias < 5%): 35 bits -> " << min_samples(35, 0.05)
        << " samples (commonly rounded to 3,800,000); 19 bits -> " << min_samples(19, 0.05)
        << " (commonly rounded to 15,000)\n";
    return out.str();
}

void write_all_artifacts(const AnalysisReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_report_json(report, (dir / "report.json").string());
    write_findings_json(report, (dir / "findings.json").string());
    write_matrix_csv(report, (dir / "matrix.csv").string());
    write_histograms_csv(report, (dir / "histograms.csv").string());
    write_ranges_csv(report, (dir / "ranges.csv").string());
    auto out = open_out((dir / "report.txt").string());
    out << render_text_report(report);
}

} // namespace aslrkit
