#include "aslrkit/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "aslrkit/errors.hpp"
#include "aslrkit/special_functions.hpp"

namespace aslrkit {

const char* to_string(RandomizationClass c) {
    switch (c) {
        case RandomizationClass::runtime: return "runtime";
        case RandomizationClass::boot_time: return "boot_time";
        case RandomizationClass::not_randomized: return "not_randomized";
        case RandomizationClass::indeterminate: return "indeterminate";
    }
    return "?";
}

RandomizationClass classify(std::span<const std::uint64_t> addresses,
                            std::span<const std::uint32_t> boot_of) {
    if (addresses.empty() || addresses.size() != boot_of.size())
        throw LengthMismatch("classify: addresses and boot ids must pair up");

    std::uint32_t n_boots = 0;
    for (std::uint32_t b : boot_of) n_boots = std::max(n_boots, b + 1);
    std::unordered_map<std::uint32_t, std::size_t> runs_per_boot;
    for (std::uint32_t b : boot_of) ++runs_per_boot[b];
    bool some_boot_with_two = false;
    for (const auto& [b, n] : runs_per_boot)
        if (n >= 2) some_boot_with_two = true;
    if (n_boots < 2 || !some_boot_with_two) return RandomizationClass::indeterminate;

    bool constant_overall = true;
    bool constant_within_boots = true;
    std::unordered_map<std::uint32_t, std::uint64_t> first_in_boot;
    for (std::size_t i = 0; i < addresses.size(); ++i) {
        if (addresses[i] != addresses.front()) constant_overall = false;
        auto [it, inserted] = first_in_boot.emplace(boot_of[i], addresses[i]);
        if (!inserted && it->second != addresses[i]) constant_within_boots = false;
    }
    if (constant_overall) return RandomizationClass::not_randomized;
    if (constant_within_boots) return RandomizationClass::boot_time;
    return RandomizationClass::runtime;
}

std::vector<ObjectGroup> group_contiguous(const SampleSet& set) {
    const auto& keys = set.keys();
    const std::size_t n = set.record_count();

    // Two objects share a group iff their delta series (value minus first
    // value) coincide; hash the delta series and bucket.
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    std::vector<std::vector<std::int64_t>> deltas(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
        if (set.null_count(k) > 0) continue; // partial series are not analyzed
        auto col = set.column(k);
        auto& d = deltas[k];
        d.resize(n);
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = static_cast<std::int64_t>(col[i]) - static_cast<std::int64_t>(col[0]);
            h ^= static_cast<std::uint64_t>(d[i]);
            h *= 0x100000001b3ull;
        }
        buckets[h].push_back(k);
    }

    std::vector<ObjectGroup> groups;
    std::vector<bool> grouped(keys.size(), false);
    for (auto& [hash, members] : buckets) {
        // Hash collisions are resolved by exact comparison.
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (grouped[members[i]]) continue;
            ObjectGroup g;
            std::vector<std::size_t> idx{members[i]};
            grouped[members[i]] = true;
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                if (grouped[members[j]]) continue;
                if (deltas[members[i]] == deltas[members[j]]) {
                    idx.push_back(members[j]);
                    grouped[members[j]] = true;
                }
            }
            std::sort(idx.begin(), idx.end(),
                      [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
            g.representative = keys[idx.front()];
            const auto rep_col = set.column(idx.front());
            for (std::size_t k : idx) {
                g.members.push_back(keys[k]);
                g.offsets.push_back(static_cast<std::int64_t>(set.column(k)[0]) -
                                    static_cast<std::int64_t>(rep_col[0]));
            }
            groups.push_back(std::move(g));
        }
    }
    std::sort(groups.begin(), groups.end(),
              [](const ObjectGroup& a, const ObjectGroup& b) { return a.representative < b.representative; });
    return groups;
}

std::vector<AddressRange> layout_ranges(const SampleSet& set) {
    std::vector<AddressRange> out;
    for (std::size_t k = 0; k < set.keys().size(); ++k) {
        AddressRange r;
        r.object = set.keys()[k];
        r.min = ~0ull;
        r.max = 0;
        bool any = false;
        for (std::uint64_t a : set.column(k)) {
            if (a == SampleSet::kNullAddress) continue;
            any = true;
            r.min = std::min(r.min, a);
            r.max = std::max(r.max, a);
        }
        if (!any) { r.min = 0; r.max = 0; }
        out.push_back(r);
    }
    return out;
}

Histogram histogram(std::span<const std::uint64_t> addresses) {
    if (addresses.size() < 100) throw EmptySeries("histogram needs at least 100 samples");
    Histogram h;
    h.lo = *std::min_element(addresses.begin(), addresses.end());
    h.hi = *std::max_element(addresses.begin(), addresses.end());
    if (h.lo == h.hi) throw DegenerateRange("histogram over a point mass");
    h.counts.assign(Histogram::kBins, 0);
    const double width = static_cast<double>(h.hi - h.lo) / Histogram::kBins;
    for (std::uint64_t a : addresses) {
        auto bin = static_cast<std::size_t>(static_cast<double>(a - h.lo) / width);
        if (bin >= Histogram::kBins) bin = Histogram::kBins - 1;
        ++h.counts[bin];
    }
    const double n = static_cast<double>(addresses.size());
    const double expected = n / Histogram::kBins;
    h.probabilities.resize(Histogram::kBins);
    for (unsigned i = 0; i < Histogram::kBins; ++i) {
        h.probabilities[i] = static_cast<double>(h.counts[i]) / n;
        h.max_deviation = std::max(h.max_deviation, std::fabs(h.probabilities[i] - 0.01));
        const double d = static_cast<double>(h.counts[i]) - expected;
        h.chi_square += d * d / expected;
    }
    h.p_value = chi_square_p_value(h.chi_square, Histogram::kBins - 1);
    h.uniform_verdict = h.p_value > 0.01;
    return h;
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned count = std::min<std::size_t>(jobs, n);
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

namespace {

// Repeated samples of a boot-scoped value carry no information, so series
// that only change across boots are reduced to one entry per boot before
// estimation (this is what makes boot-time sample budgets so much smaller).
template <typename T>
std::vector<T> per_boot_values(std::span<const T> series, std::span<const std::uint32_t> boot_of) {
    std::vector<T> out;
    std::uint32_t seen = ~0u;
    bool first = true;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (first || boot_of[i] != seen) {
            out.push_back(series[i]);
            seen = boot_of[i];
            first = false;
        }
    }
    return out;
}

template <typename T>
bool constant_within_boots(std::span<const T> series, std::span<const std::uint32_t> boot_of) {
    std::unordered_map<std::uint32_t, T> first;
    for (std::size_t i = 0; i < series.size(); ++i) {
        auto [it, inserted] = first.emplace(boot_of[i], series[i]);
        if (!inserted && it->second != series[i]) return false;
    }
    return true;
}

template <typename T>
bool varies_at_all(std::span<const T> series) {
    return !std::all_of(series.begin(), series.end(), [&](const T& v) { return v == series.front(); });
}

} // namespace

DistanceEntropyMatrix distance_matrix(const SampleSet& set, const std::vector<ObjectGroup>& groups,
                                      const EstimatorConfig& config) {
    DistanceEntropyMatrix matrix;
    for (const auto& g : groups) matrix.labels.push_back(g.representative);
    const std::size_t n = matrix.labels.size();
    matrix.cells.resize(n * n);

    const auto boot_of = set.boot_of_records();
    std::vector<std::vector<std::uint64_t>> columns(n);
    for (std::size_t i = 0; i < n; ++i) columns[i] = set.column(set.key_index(matrix.labels[i]));

    // Diagonal: absolute entropy of each representative at its observed
    // alignment, alphabet bounded by the changing bitmask unless overridden.
    struct Task { std::size_t r, c; };
    std::vector<Task> tasks;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = r; c < n; ++c) tasks.push_back({r, c});

    parallel_for(tasks.size(), config.jobs, [&](std::size_t t) {
        const auto [r, c] = tasks[t];
        MatrixCell cell;
        cell.row = matrix.labels[r];
        cell.col = matrix.labels[c];
        try {
            if (r == c) {
                std::vector<std::uint64_t> col = columns[r];
                EstimateScope scope = EstimateScope::per_record;
                if (set.boot_ids().size() >= 2 && varies_at_all<std::uint64_t>(col) &&
                    constant_within_boots<std::uint64_t>(col, boot_of)) {
                    col = per_boot_values<std::uint64_t>(col, boot_of);
                    scope = EstimateScope::per_boot;
                }
                const unsigned align = observed_alignment_bits(col);
                NormalizedSeries series =
                    scope == EstimateScope::per_boot
                        ? normalize(ObjectKey{}, col, align == 64 ? 0 : align)
                        : normalize(ObjectKey{}, col, align == 64 ? 0 : align, true, boot_of, set.boot_ids());
                if (config.method == EstimatorMethod::nsb) {
                    const Bitmask mask = changing_bitmask(series);
                    double alphabet = config.alphabet_override_bits
                                          ? *config.alphabet_override_bits
                                          : static_cast<double>(mask.bit_count);
                    if (mask.bit_count == 0) {
                        EntropyEstimate e;
                        e.method = EstimatorMethod::nsb;
                        e.n_samples = series.values.size();
                        e.bias_bound = 1.0 / static_cast<double>(e.n_samples);
                        cell.estimate = e;
                    } else {
                        cell.estimate = nsb_entropy(series, alphabet);
                    }
                } else {
                    cell.estimate = plugin_entropy(series);
                }
                cell.estimate->scope = scope;
            } else {
                std::vector<std::int64_t> diffs = difference_series(columns[r], columns[c]);
                EstimateScope scope = EstimateScope::per_record;
                if (set.boot_ids().size() >= 2 && varies_at_all<std::int64_t>(diffs) &&
                    constant_within_boots<std::int64_t>(diffs, boot_of)) {
                    diffs = per_boot_values<std::int64_t>(diffs, boot_of);
                    scope = EstimateScope::per_boot;
                }
                auto e = difference_entropy(diffs, config.method == EstimatorMethod::byte_plugin
                                                       ? EstimatorMethod::plugin
                                                       : config.method);
                e.scope = scope;
                cell.estimate = e;
            }
            if (cell.estimate) {
                if (cell.estimate->low_confidence) cell.flags = "low_confidence";
                if (cell.estimate->scope == EstimateScope::per_boot)
                    cell.flags += cell.flags.empty() ? "per_boot" : ";per_boot";
            }
        } catch (const Error& e) {
            cell.flags = std::string("error: ") + e.what();
        }
        matrix.cells[r * n + c] = cell;
        if (r != c) {
            MatrixCell mirror = cell;
            std::swap(mirror.row, mirror.col);
            matrix.cells[c * n + r] = std::move(mirror);
        }
    });
    return matrix;
}

} // namespace aslrkit
