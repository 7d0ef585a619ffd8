#include "aslrkit/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "aslrkit/errors.hpp"
#include "aslrkit/rng.hpp"

namespace aslrkit {

namespace {

using nlohmann::json;

constexpr std::size_t kMaxStates = std::size_t(1) << 24;

// ---------------------------------------------------------------------------
// Placement programs. Each object's address is described by a short op list
// applied on top of its anchor's address (or a constant base for roots).
// generate() and the analytic oracles interpret the same program, so the
// sampled law and the closed-form law cannot drift apart.

struct OpConst { std::int64_t delta; };
struct OpUniform { std::uint64_t slots; std::uint64_t step; int sign; };
struct OpAlignUp { std::uint64_t align; };
struct OpAlignDown { std::uint64_t align; };
using Op = std::variant<OpConst, OpUniform, OpAlignUp, OpAlignDown>;

struct Program {
    std::optional<std::size_t> anchor; // object index
    std::vector<Op> ops;
};

std::uint64_t pow2(unsigned bits) { return 1ull << bits; }

Program placement_program(const PolicySpec& policy, std::size_t index) {
    const ObjectPlacement& obj = policy.objects[index];
    Program prog;
    if (const auto* u = std::get_if<UniformBase>(&obj.mode)) {
        prog.ops.push_back(OpConst{static_cast<std::int64_t>(u->lo)});
        prog.ops.push_back(OpUniform{(u->hi - u->lo) >> u->align_bits, pow2(u->align_bits), +1});
    } else if (const auto* t = std::get_if<TwoSource>(&obj.mode)) {
        prog.ops.push_back(OpConst{static_cast<std::int64_t>(t->base.lo + t->plus_lo)});
        prog.ops.push_back(
            OpUniform{(t->base.hi - t->base.lo) >> t->base.align_bits, pow2(t->base.align_bits), +1});
        prog.ops.push_back(OpUniform{(t->plus_hi - t->plus_lo) >> t->align_bits, pow2(t->align_bits), +1});
    } else {
        const auto& r = std::get<RelativePlacement>(obj.mode);
        std::size_t anchor_idx = 0;
        for (; anchor_idx < index; ++anchor_idx)
            if (policy.objects[anchor_idx].name == r.anchor) break;
        prog.anchor = anchor_idx;
        const std::int64_t anchor_end = static_cast<std::int64_t>(policy.objects[anchor_idx].size_bytes);
        const std::int64_t own_size = static_cast<std::int64_t>(obj.size_bytes);
        const bool above = r.direction == Direction::above;
        switch (r.offset_mode) {
            case OffsetMode::zero:
                prog.ops.push_back(OpConst{above ? anchor_end : -own_size});
                break;
            case OffsetMode::fixed:
                prog.ops.push_back(OpConst{above ? anchor_end + static_cast<std::int64_t>(r.fixed_bytes)
                                                 : -(own_size + static_cast<std::int64_t>(r.fixed_bytes))});
                break;
            case OffsetMode::alignment:
                prog.ops.push_back(OpConst{above ? anchor_end : -own_size});
                if (above)
                    prog.ops.push_back(OpAlignUp{pow2(r.align_bits)});
                else
                    prog.ops.push_back(OpAlignDown{pow2(r.align_bits)});
                break;
            case OffsetMode::random:
                prog.ops.push_back(OpConst{above ? anchor_end + static_cast<std::int64_t>(r.random_lo)
                                                 : -(own_size + static_cast<std::int64_t>(r.random_lo))});
                prog.ops.push_back(OpUniform{(r.random_hi - r.random_lo) >> r.random_align_bits,
                                             pow2(r.random_align_bits), above ? +1 : -1});
                break;
        }
    }
    return prog;
}

// ---------------------------------------------------------------------------
// Discrete distributions on an arithmetic grid (start + i*step), dense.

struct Dist {
    std::int64_t start = 0;
    std::uint64_t step = 1;
    std::vector<double> p{1.0};

    std::int64_t value_at(std::size_t i) const { return start + static_cast<std::int64_t>(i * step); }
};

std::optional<Dist> restride(Dist d, std::uint64_t new_step) {
    if (new_step == d.step) return d;
    const std::uint64_t ratio = d.step / new_step;
    const std::size_t n = (d.p.size() - 1) * ratio + 1;
    if (n > kMaxStates) return std::nullopt;
    std::vector<double> q(n, 0.0);
    for (std::size_t i = 0; i < d.p.size(); ++i) q[i * ratio] = d.p[i];
    d.p = std::move(q);
    d.step = new_step;
    return d;
}

std::optional<Dist> conv_uniform(Dist d, const OpUniform& u) {
    if (u.slots == 0) return std::nullopt;
    if (u.slots == 1) return d;
    const std::uint64_t g = std::min(d.step, u.step);
    auto rd = restride(std::move(d), g);
    if (!rd) return std::nullopt;
    Dist out;
    out.step = g;
    const std::uint64_t m = u.step / g;
    const std::size_t n = rd->p.size();
    const std::size_t result_n = n + (u.slots - 1) * m;
    if (result_n > kMaxStates) return std::nullopt;
    out.p.assign(result_n, 0.0);
    // conv with a uniform over {0, m, 2m, ...}: sliding window sum per
    // residue class modulo m.
    const double inv = 1.0 / static_cast<double>(u.slots);
    for (std::uint64_t r = 0; r < m && r < result_n; ++r) {
        double window = 0.0;
        for (std::size_t j = r; j < result_n; j += m) {
            if (j < n) window += rd->p[j];
            const std::size_t drop = j >= u.slots * m ? j - u.slots * m : result_n; // index leaving the window
            if (drop < n && j >= u.slots * m) window -= rd->p[drop];
            out.p[j] = window * inv;
        }
    }
    // A reversed uniform is the same uniform shifted.
    const std::int64_t span = static_cast<std::int64_t>((u.slots - 1) * u.step);
    out.start = u.sign > 0 ? rd->start : rd->start - span;
    return out;
}

std::int64_t align_up_value(std::int64_t v, std::uint64_t a) {
    const std::int64_t ia = static_cast<std::int64_t>(a);
    std::int64_t q = v / ia;
    if (v % ia != 0 && v > 0) ++q;
    return q * ia;
}

std::int64_t align_down_value(std::int64_t v, std::uint64_t a) {
    const std::int64_t ia = static_cast<std::int64_t>(a);
    std::int64_t q = v / ia;
    if (v % ia != 0 && v < 0) --q;
    return q * ia;
}

std::optional<Dist> pointwise_align(const Dist& d, std::uint64_t a, bool up) {
    Dist out;
    out.step = a;
    const std::int64_t first = up ? align_up_value(d.start, a) : align_down_value(d.start, a);
    const std::int64_t last_in = d.value_at(d.p.size() - 1);
    const std::int64_t last = up ? align_up_value(last_in, a) : align_down_value(last_in, a);
    const std::size_t n = static_cast<std::size_t>((last - first) / static_cast<std::int64_t>(a)) + 1;
    if (n > kMaxStates) return std::nullopt;
    out.start = first;
    out.p.assign(n, 0.0);
    for (std::size_t i = 0; i < d.p.size(); ++i) {
        std::int64_t v = d.value_at(i);
        std::int64_t w = up ? align_up_value(v, a) : align_down_value(v, a);
        out.p[static_cast<std::size_t>((w - first) / static_cast<std::int64_t>(a))] += d.p[i];
    }
    return out;
}

std::optional<Dist> apply_op(Dist d, const Op& op) {
    if (const auto* c = std::get_if<OpConst>(&op)) {
        d.start += c->delta;
        return d;
    }
    if (const auto* u = std::get_if<OpUniform>(&op)) return conv_uniform(std::move(d), *u);
    if (const auto* a = std::get_if<OpAlignUp>(&op)) return pointwise_align(d, a->align, true);
    const auto& a = std::get<OpAlignDown>(op);
    return pointwise_align(d, a.align, false);
}

double dist_entropy_bits(const Dist& d) {
    double h = 0.0;
    for (double p : d.p)
        if (p > 0.0) h -= p * std::log2(p);
    return h < 0 ? 0.0 : h;
}

// Full op chain from the root down to `index`, anchors expanded.
std::vector<Op> full_chain(const PolicySpec& policy, std::size_t index) {
    std::vector<std::vector<Op>> parts;
    std::optional<std::size_t> cur = index;
    while (cur) {
        Program prog = placement_program(policy, *cur);
        parts.push_back(std::move(prog.ops));
        cur = prog.anchor;
    }
    std::vector<Op> chain;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it)
        chain.insert(chain.end(), it->begin(), it->end());
    return chain;
}

std::vector<std::size_t> ancestor_path(const PolicySpec& policy, std::size_t index) {
    std::vector<std::size_t> path;
    std::optional<std::size_t> cur = index;
    while (cur) {
        path.push_back(*cur);
        cur = placement_program(policy, *cur).anchor;
    }
    std::reverse(path.begin(), path.end()); // root first
    return path;
}

bool has_align(const std::vector<Op>& ops) {
    for (const Op& op : ops)
        if (std::holds_alternative<OpAlignUp>(op) || std::holds_alternative<OpAlignDown>(op)) return true;
    return false;
}

std::optional<Dist> dense_from_ops_onto(Dist d, const std::vector<Op>& ops) {
    for (const Op& op : ops) {
        auto next = apply_op(std::move(d), op);
        if (!next) return std::nullopt;
        d = std::move(*next);
    }
    return d;
}

std::optional<Dist> dense_from_ops(const std::vector<Op>& ops) {
    return dense_from_ops_onto(Dist{}, ops);
}

std::optional<double> marginal_entropy(const PolicySpec& policy, std::size_t index) {
    std::vector<Op> chain = full_chain(policy, index);
    // Translation-invariant closed form: one uniform plus constants.
    if (!has_align(chain)) {
        std::size_t uniforms = 0;
        std::uint64_t slots = 1;
        for (const Op& op : chain)
            if (const auto* u = std::get_if<OpUniform>(&op)) {
                ++uniforms;
                slots = u->slots;
            }
        if (uniforms == 0) return 0.0;
        if (uniforms == 1) return std::log2(static_cast<double>(slots));
    }
    auto d = dense_from_ops(chain);
    if (!d) return std::nullopt;
    return dist_entropy_bits(*d);
}

// Ops strictly below the common ancestor on the way to `index`
// (empty when index itself is the ancestor).
std::vector<Op> ops_below(const PolicySpec& policy, const std::vector<std::size_t>& path,
                          std::size_t ancestor_pos) {
    std::vector<Op> ops;
    for (std::size_t i = ancestor_pos + 1; i < path.size(); ++i) {
        Program prog = placement_program(policy, path[i]);
        ops.insert(ops.end(), prog.ops.begin(), prog.ops.end());
    }
    return ops;
}

// Applies the negation of affine ops (consts and uniforms) onto d.
std::optional<Dist> subtract_affine(Dist d, const std::vector<Op>& ops) {
    for (const Op& op : ops) {
        if (const auto* c = std::get_if<OpConst>(&op)) {
            d.start -= c->delta;
        } else if (const auto* u = std::get_if<OpUniform>(&op)) {
            OpUniform neg = *u;
            neg.sign = -neg.sign;
            auto next = conv_uniform(std::move(d), neg);
            if (!next) return std::nullopt;
            d = std::move(*next);
        } else {
            return std::nullopt;
        }
    }
    return d;
}

// Deterministic-given-anchor prefix followed by affine suffix; the split
// point is the first uniform. Returns nullopt when an alignment op appears
// after a uniform (difference no longer decomposes).
struct PathSplit {
    std::vector<Op> pointwise; // consts + aligns, function of the anchor value
    std::vector<Op> affine;    // consts + uniforms
};

std::optional<PathSplit> split_path(const std::vector<Op>& ops) {
    PathSplit split;
    bool seen_uniform = false;
    for (const Op& op : ops) {
        if (std::holds_alternative<OpUniform>(op)) {
            seen_uniform = true;
            split.affine.push_back(op);
        } else if (std::holds_alternative<OpConst>(op)) {
            (seen_uniform ? split.affine : split.pointwise).push_back(op);
        } else {
            if (seen_uniform) return std::nullopt;
            split.pointwise.push_back(op);
        }
    }
    return split;
}

std::int64_t eval_pointwise(std::int64_t v, const std::vector<Op>& ops) {
    for (const Op& op : ops) {
        if (const auto* c = std::get_if<OpConst>(&op))
            v += c->delta;
        else if (const auto* a = std::get_if<OpAlignUp>(&op))
            v = align_up_value(v, a->align);
        else if (const auto* a2 = std::get_if<OpAlignDown>(&op))
            v = align_down_value(v, a2->align);
    }
    return v;
}

std::optional<Dist> difference_dist(const PolicySpec& policy, std::size_t ia, std::size_t ib) {
    const auto path_a = ancestor_path(policy, ia);
    const auto path_b = ancestor_path(policy, ib);

    // Deepest common ancestor, if the chains share a root.
    std::optional<std::size_t> lca_pos;
    if (path_a.front() == path_b.front()) {
        std::size_t i = 0;
        while (i < path_a.size() && i < path_b.size() && path_a[i] == path_b[i]) ++i;
        lca_pos = i - 1;
    }

    if (lca_pos) {
        auto sa = split_path(ops_below(policy, path_a, *lca_pos));
        auto sb = split_path(ops_below(policy, path_b, *lca_pos));
        if (!sa || !sb) return std::nullopt;
        Dist d; // point mass at zero
        if (!sa->pointwise.empty() || !sb->pointwise.empty()) {
            // The difference of the two pointwise parts is a deterministic
            // function of the ancestor; enumerate its marginal.
            auto anchor = dense_from_ops(full_chain(policy, path_a[*lca_pos]));
            if (!anchor) return std::nullopt;
            std::map<std::int64_t, double> acc;
            for (std::size_t i = 0; i < anchor->p.size(); ++i) {
                if (anchor->p[i] == 0.0) continue;
                std::int64_t v = anchor->value_at(i);
                acc[eval_pointwise(v, sa->pointwise) - eval_pointwise(v, sb->pointwise)] += anchor->p[i];
            }
            std::uint64_t g = 0;
            const std::int64_t base = acc.begin()->first;
            for (const auto& [v, p] : acc) g = std::gcd(g, static_cast<std::uint64_t>(v - base));
            if (g == 0) g = 1;
            const std::size_t n = static_cast<std::size_t>((acc.rbegin()->first - base) / static_cast<std::int64_t>(g)) + 1;
            if (n > kMaxStates) return std::nullopt;
            d.start = base;
            d.step = g;
            d.p.assign(n, 0.0);
            for (const auto& [v, p] : acc) d.p[static_cast<std::size_t>((v - base) / static_cast<std::int64_t>(g))] += p;
        }
        auto with_a = dense_from_ops_onto(std::move(d), sa->affine);
        if (!with_a) return std::nullopt;
        return subtract_affine(std::move(*with_a), sb->affine);
    }

    // Independent constructions: fold the full difference as
    // marginal(a) (+) reversed affine chain of b, trying both orders since
    // H(X - Y) == H(Y - X).
    for (int order = 0; order < 2; ++order) {
        const std::size_t first = order == 0 ? ia : ib;
        const std::size_t second = order == 0 ? ib : ia;
        std::vector<Op> chain_b = full_chain(policy, second);
        if (has_align(chain_b)) continue;
        auto d = dense_from_ops(full_chain(policy, first));
        if (!d) continue;
        auto diff = subtract_affine(std::move(*d), chain_b);
        if (diff) return diff;
    }
    // Last resort: both marginals dense, direct cross-convolution.
    auto da = dense_from_ops(full_chain(policy, ia));
    auto db = dense_from_ops(full_chain(policy, ib));
    if (!da || !db) return std::nullopt;
    if (da->p.size() * db->p.size() > (std::size_t(1) << 26)) return std::nullopt;
    const std::uint64_t g = std::min(da->step, db->step);
    auto ra = restride(std::move(*da), g);
    auto rb = restride(std::move(*db), g);
    if (!ra || !rb) return std::nullopt;
    Dist out;
    out.step = g;
    out.start = ra->start - rb->value_at(rb->p.size() - 1);
    const std::size_t n = ra->p.size() + rb->p.size() - 1;
    if (n > kMaxStates) return std::nullopt;
    out.p.assign(n, 0.0);
    for (std::size_t i = 0; i < ra->p.size(); ++i) {
        if (ra->p[i] == 0.0) continue;
        for (std::size_t j = 0; j < rb->p.size(); ++j)
            out.p[i + (rb->p.size() - 1 - j)] += ra->p[i] * rb->p[j];
    }
    return out;
}

} // namespace

const ObjectPlacement* PolicySpec::find(const std::string& name) const {
    for (const auto& obj : objects)
        if (obj.name == name) return &obj;
    return nullptr;
}

void PolicySpec::validate() const {
    if (page_bits != 12 && page_bits != 14) throw PolicyError("page_bits must be 12 or 14");
    if (runs_per_boot < 1) throw PolicyError("runs_per_boot must be >= 1");
    if (objects.empty()) throw PolicyError("policy has no objects");

    auto check_region = [&](const UniformBase& u, const std::string& name) {
        if (u.align_bits < page_bits || u.align_bits > 47)
            throw PolicyError(name + ": align_bits outside [page_bits, 47]");
        if (u.lo >= u.hi) throw PolicyError(name + ": inverted range");
        const std::uint64_t step = pow2(u.align_bits);
        if (u.lo % step || u.hi % step) throw PolicyError(name + ": range not aligned to 2^align_bits");
        if (u.hi > (1ull << 63)) throw PolicyError(name + ": region reaches kernel space");
    };

    std::set<std::string> seen;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& obj = objects[i];
        if (obj.name.empty()) throw PolicyError("object with empty name");
        if (!seen.insert(obj.name).second) throw PolicyError("duplicate object \"" + obj.name + "\"");
        if (obj.size_bytes % pow2(page_bits))
            throw PolicyError(obj.name + ": size_bytes not page aligned");
        if (const auto* u = std::get_if<UniformBase>(&obj.mode)) {
            check_region(*u, obj.name);
        } else if (const auto* t = std::get_if<TwoSource>(&obj.mode)) {
            check_region(t->base, obj.name);
            if (t->align_bits < page_bits || t->align_bits > 47)
                throw PolicyError(obj.name + ": align_bits outside [page_bits, 47]");
            if (t->plus_lo >= t->plus_hi) throw PolicyError(obj.name + ": inverted plus range");
            const std::uint64_t step = pow2(t->align_bits);
            if (t->plus_lo % step || t->plus_hi % step)
                throw PolicyError(obj.name + ": plus range not aligned to 2^align_bits");
        } else {
            const auto& r = std::get<RelativePlacement>(obj.mode);
            bool found = false;
            for (std::size_t j = 0; j < i; ++j)
                if (objects[j].name == r.anchor) { found = true; break; }
            if (!found) throw PolicyError(obj.name + ": dangling anchor \"" + r.anchor + "\"");
            if (r.offset_mode == OffsetMode::fixed && r.fixed_bytes % pow2(page_bits))
                throw PolicyError(obj.name + ": fixed offset not page aligned");
            if (r.offset_mode == OffsetMode::alignment &&
                (r.align_bits < page_bits || r.align_bits > 47))
                throw PolicyError(obj.name + ": align_bits outside [page_bits, 47]");
            if (r.offset_mode == OffsetMode::random) {
                if (r.random_align_bits < page_bits || r.random_align_bits > 47)
                    throw PolicyError(obj.name + ": align_bits outside [page_bits, 47]");
                if (r.random_lo >= r.random_hi) throw PolicyError(obj.name + ": inverted offset range");
                const std::uint64_t step = pow2(r.random_align_bits);
                if (r.random_lo % step || r.random_hi % step)
                    throw PolicyError(obj.name + ": offset range not aligned to 2^align_bits");
            }
            // A boot-scoped object anchored to a run-scoped one would change
            // within a boot, contradicting the scope; reject it outright.
            if (boot_scoped.count(obj.name) && !boot_scoped.count(r.anchor))
                throw PolicyError(obj.name + ": boot-scoped object anchored to run-scoped \"" + r.anchor + "\"");
        }
    }
    for (const auto& name : boot_scoped)
        if (!find(name)) throw PolicyError("boot_scoped names unknown object \"" + name + "\"");
}

SampleSet generate(const PolicySpec& policy, std::uint64_t n_runs) {
    policy.validate();
    if (n_runs < 1) throw PolicyError("n_runs must be >= 1");

    const std::size_t n_objects = policy.objects.size();
    std::vector<Program> programs(n_objects);
    std::vector<bool> boot_scoped(n_objects);
    for (std::size_t i = 0; i < n_objects; ++i) {
        programs[i] = placement_program(policy, i);
        boot_scoped[i] = policy.boot_scoped.count(policy.objects[i].name) > 0;
    }

    // Keys are sorted in the SampleSet; remember where each object lands.
    SampleSet set;
    set.platform.os = "synthetic";
    set.platform.arch = "model";
    set.platform.kernel_version = "aslrkit-synth";
    set.platform.page_size_bytes = policy.page_bits == 12 ? 4096 : 16384;
    set.platform.source = SampleSource::synthetic;
    set.platform.extra["rng"] = kRngAlgorithm;
    set.policy_fingerprint = policy_fingerprint(policy);
    {
        std::vector<std::string> keys;
        keys.reserve(n_objects);
        for (const auto& obj : policy.objects) keys.push_back(obj.name);
        set.set_keys(std::move(keys));
    }
    std::vector<std::size_t> key_slot(n_objects);
    for (std::size_t i = 0; i < n_objects; ++i) key_slot[i] = set.key_index(policy.objects[i].name);

    std::vector<std::int64_t> values(n_objects);
    std::vector<std::uint64_t> row(n_objects);
    std::string boot_id;
    for (std::uint64_t run = 0; run < n_runs; ++run) {
        const std::uint64_t boot = run / policy.runs_per_boot;
        if (run % policy.runs_per_boot == 0) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "boot-%06llu", static_cast<unsigned long long>(boot));
            boot_id = buf;
        }
        for (std::size_t i = 0; i < n_objects; ++i) {
            const std::uint64_t epoch = boot_scoped[i] ? boot : run;
            std::int64_t v = programs[i].anchor ? values[*programs[i].anchor] : 0;
            std::uint32_t slot = 0;
            for (const Op& op : programs[i].ops) {
                if (const auto* c = std::get_if<OpConst>(&op)) {
                    v += c->delta;
                } else if (const auto* u = std::get_if<OpUniform>(&op)) {
                    CounterRng rng(policy.seed, draw_stream(static_cast<std::uint32_t>(i), slot++));
                    std::uint64_t counter = epoch << 20;
                    const std::uint64_t k = rng.bounded(u->slots, &counter);
                    const std::int64_t off = static_cast<std::int64_t>(k * u->step);
                    v += u->sign > 0 ? off : -off;
                } else if (const auto* a = std::get_if<OpAlignUp>(&op)) {
                    v = align_up_value(v, a->align);
                } else {
                    v = align_down_value(v, std::get<OpAlignDown>(op).align);
                }
            }
            if (v < 0 || (static_cast<std::uint64_t>(v) >> 63))
                throw PolicyError(policy.objects[i].name + ": generated address outside user space");
            values[i] = v;
            row[key_slot[i]] = static_cast<std::uint64_t>(v);
        }
        set.append_record(boot_id, run, static_cast<std::int64_t>(run), row);
    }
    return set;
}

std::optional<double> analytic_entropy(const PolicySpec& policy, const std::string& object) {
    policy.validate();
    for (std::size_t i = 0; i < policy.objects.size(); ++i)
        if (policy.objects[i].name == object) return marginal_entropy(policy, i);
    throw UnknownObject("no such object \"" + object + "\"");
}

std::optional<double> analytic_corr_entropy(const PolicySpec& policy, const std::string& a,
                                            const std::string& b) {
    policy.validate();
    std::optional<std::size_t> ia, ib;
    for (std::size_t i = 0; i < policy.objects.size(); ++i) {
        if (policy.objects[i].name == a) ia = i;
        if (policy.objects[i].name == b) ib = i;
    }
    if (!ia) throw UnknownObject("no such object \"" + a + "\"");
    if (!ib) throw UnknownObject("no such object \"" + b + "\"");
    if (*ia == *ib) return 0.0;
    auto d = difference_dist(policy, *ia, *ib);
    if (!d) return std::nullopt;
    return dist_entropy_bits(*d);
}

// ---------------------------------------------------------------------------
// JSON <-> PolicySpec

namespace {

std::uint64_t read_u64(const json& v, const std::string& what) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        try {
            if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X'))
                return std::stoull(s.substr(2), nullptr, 16);
            return std::stoull(s);
        } catch (const std::exception&) {
            throw PolicyError("bad number for " + what + ": \"" + s + "\"");
        }
    }
    throw PolicyError("bad number for " + what);
}

json u64_json(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

UniformBase uniform_from_json(const json& j, const std::string& what) {
    UniformBase u;
    u.lo = read_u64(j.at("lo"), what + ".lo");
    u.hi = read_u64(j.at("hi"), what + ".hi");
    u.align_bits = j.at("align_bits").get<unsigned>();
    return u;
}

json uniform_to_json(const UniformBase& u) {
    return json{{"lo", u64_json(u.lo)}, {"hi", u64_json(u.hi)}, {"align_bits", u.align_bits}};
}

} // namespace

PolicySpec load_policy(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw PolicyError(std::string("bad policy JSON: ") + e.what());
    }
    PolicySpec policy;
    try {
        policy.page_bits = j.at("page_bits").get<unsigned>();
        policy.seed = j.contains("seed") ? read_u64(j["seed"], "seed") : 0;
        policy.runs_per_boot = j.contains("runs_per_boot") ? read_u64(j["runs_per_boot"], "runs_per_boot") : 1000;
        if (j.contains("boot_scoped"))
            for (const auto& name : j["boot_scoped"]) policy.boot_scoped.insert(name.get<std::string>());
        for (const auto& jo : j.at("objects")) {
            ObjectPlacement obj;
            obj.name = jo.at("name").get<std::string>();
            if (jo.contains("size_bytes")) obj.size_bytes = read_u64(jo["size_bytes"], obj.name + ".size_bytes");
            const json& mode = jo.at("mode");
            if (mode.contains("uniform_base")) {
                obj.mode = uniform_from_json(mode["uniform_base"], obj.name);
            } else if (mode.contains("two_source")) {
                const json& t = mode["two_source"];
                TwoSource ts;
                ts.base = uniform_from_json(t.at("base"), obj.name + ".base");
                ts.plus_lo = read_u64(t.at("plus").at("lo"), obj.name + ".plus.lo");
                ts.plus_hi = read_u64(t.at("plus").at("hi"), obj.name + ".plus.hi");
                ts.align_bits = t.at("align_bits").get<unsigned>();
                obj.mode = ts;
            } else if (mode.contains("relative")) {
                const json& r = mode["relative"];
                RelativePlacement rel;
                rel.anchor = r.at("anchor").get<std::string>();
                const std::string dir = r.at("direction").get<std::string>();
                if (dir == "above") rel.direction = Direction::above;
                else if (dir == "below") rel.direction = Direction::below;
                else throw PolicyError(obj.name + ": bad direction \"" + dir + "\"");
                const json& om = r.at("offset_mode");
                if (om.is_string() && om.get<std::string>() == "zero") {
                    rel.offset_mode = OffsetMode::zero;
                } else if (om.contains("fixed")) {
                    rel.offset_mode = OffsetMode::fixed;
                    rel.fixed_bytes = read_u64(om["fixed"].at("bytes"), obj.name + ".fixed.bytes");
                } else if (om.contains("alignment")) {
                    rel.offset_mode = OffsetMode::alignment;
                    rel.align_bits = om["alignment"].at("align_bits").get<unsigned>();
                } else if (om.contains("random")) {
                    rel.offset_mode = OffsetMode::random;
                    rel.random_lo = read_u64(om["random"].at("lo"), obj.name + ".random.lo");
                    rel.random_hi = read_u64(om["random"].at("hi"), obj.name + ".random.hi");
                    rel.random_align_bits = om["random"].at("align_bits").get<unsigned>();
                } else {
                    throw PolicyError(obj.name + ": bad offset_mode");
                }
                obj.mode = rel;
            } else {
                throw PolicyError(obj.name + ": unknown placement mode");
            }
            policy.objects.push_back(std::move(obj));
        }
    } catch (const json::exception& e) {
        throw PolicyError(std::string("bad policy JSON: ") + e.what());
    }
    policy.validate();
    return policy;
}

PolicySpec load_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_policy(buf.str());
}

std::string policy_to_json(const PolicySpec& policy) {
    json j;
    j["page_bits"] = policy.page_bits;
    j["seed"] = policy.seed;
    j["runs_per_boot"] = policy.runs_per_boot;
    j["boot_scoped"] = json::array();
    for (const auto& name : policy.boot_scoped) j["boot_scoped"].push_back(name);
    j["objects"] = json::array();
    for (const auto& obj : policy.objects) {
        json jo;
        jo["name"] = obj.name;
        if (obj.size_bytes) jo["size_bytes"] = u64_json(obj.size_bytes);
        if (const auto* u = std::get_if<UniformBase>(&obj.mode)) {
            jo["mode"] = json{{"uniform_base", uniform_to_json(*u)}};
        } else if (const auto* t = std::get_if<TwoSource>(&obj.mode)) {
            jo["mode"] = json{{"two_source",
                               json{{"base", uniform_to_json(t->base)},
                                    {"plus", json{{"lo", u64_json(t->plus_lo)}, {"hi", u64_json(t->plus_hi)}}},
                                    {"align_bits", t->align_bits}}}};
        } else {
            const auto& r = std::get<RelativePlacement>(obj.mode);
            json om;
            switch (r.offset_mode) {
                case OffsetMode::zero: om = "zero"; break;
                case OffsetMode::fixed: om = json{{"fixed", json{{"bytes", u64_json(r.fixed_bytes)}}}}; break;
                case OffsetMode::alignment:
                    om = json{{"alignment", json{{"align_bits", r.align_bits}}}};
                    break;
                case OffsetMode::random:
                    om = json{{"random", json{{"lo", u64_json(r.random_lo)},
                                              {"hi", u64_json(r.random_hi)},
                                              {"align_bits", r.random_align_bits}}}};
                    break;
            }
            jo["mode"] = json{{"relative", json{{"anchor", r.anchor},
                                                {"direction", r.direction == Direction::above ? "above" : "below"},
                                                {"offset_mode", om}}}};
        }
        j["objects"].push_back(std::move(jo));
    }
    return j.dump();
}

std::string policy_fingerprint(const PolicySpec& policy) {
    // FNV-1a over the canonical JSON form.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : policy_to_json(policy)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Builtin policies

namespace {

// 467,373,275 4KB slots: log2 is 28.800 to within 5e-10, the mmap-region
// span the reference Linux measurements point at.
constexpr std::uint64_t kSlots288 = 467373275ull;

PolicySpec linux_like(bool folio_lib_big) {
    PolicySpec p;
    p.page_bits = 12;
    p.runs_per_boot = 1000;

    auto uniform = [](std::uint64_t lo, std::uint64_t slots, unsigned align) {
        UniformBase u;
        u.lo = lo;
        u.hi = lo + slots * (1ull << align);
        u.align_bits = align;
        return u;
    };

    ObjectPlacement executable;
    executable.name = "executable";
    executable.size_bytes = 0x200000;
    executable.mode = uniform(0x550000000000ull, kSlots288, 12);
    p.objects.push_back(executable);

    ObjectPlacement heap;
    heap.name = "heap_M";
    RelativePlacement heap_rel;
    heap_rel.anchor = "executable";
    heap_rel.direction = Direction::above;
    heap_rel.offset_mode = OffsetMode::random;
    heap_rel.random_lo = 0;
    heap_rel.random_hi = 0x2000000; // 2^13 page slots
    heap_rel.random_align_bits = 12;
    heap.mode = heap_rel;
    p.objects.push_back(heap);

    ObjectPlacement stack;
    stack.name = "stack&argv_M";
    stack.mode = uniform(0x780000000000ull, (1ull << 31) - (1ull << 20), 12);
    p.objects.push_back(stack);

    ObjectPlacement env;
    env.name = "env";
    RelativePlacement env_rel;
    env_rel.anchor = "stack&argv_M";
    env_rel.direction = Direction::above;
    env_rel.offset_mode = OffsetMode::random;
    env_rel.random_lo = 0;
    env_rel.random_hi = 0x400000; // 2^10 page slots
    env_rel.random_align_bits = 12;
    env.mode = env_rel;
    p.objects.push_back(env);

    ObjectPlacement lib_small;
    lib_small.name = "lib_small";
    lib_small.size_bytes = 0x200000;
    lib_small.mode = uniform(0x7e0000000000ull, kSlots288, 12);
    p.objects.push_back(lib_small);

    ObjectPlacement tls;
    tls.name = "tls_M";
    tls.size_bytes = 0x1000;
    RelativePlacement tls_rel;
    tls_rel.anchor = "lib_small";
    tls_rel.direction = Direction::below;
    tls_rel.offset_mode = OffsetMode::fixed;
    tls_rel.fixed_bytes = 0x1000;
    tls.mode = tls_rel;
    p.objects.push_back(tls);

    ObjectPlacement lib_big;
    lib_big.name = "lib_big";
    lib_big.size_bytes = 0x400000;
    // Large libraries land on 2MB-aligned slots once the kernel hands out
    // 2MB folios; nine low placement bits disappear.
    lib_big.mode = folio_lib_big ? uniform(0x7e0000000000ull, 1ull << 19, 21)
                                 : uniform(0x7e0000000000ull, kSlots288, 12);
    p.objects.push_back(lib_big);

    ObjectPlacement mmap_single;
    mmap_single.name = "mmap_single_M_1";
    mmap_single.mode = uniform(0x7e0000000000ull, kSlots288, 12);
    p.objects.push_back(mmap_single);

    ObjectPlacement mmap_huge;
    mmap_huge.name = "mmap_huge_M_1";
    mmap_huge.mode = uniform(0x7e0000000000ull, 1ull << 19, 21);
    p.objects.push_back(mmap_huge);

    return p;
}

PolicySpec windows_like() {
    PolicySpec p;
    p.page_bits = 12;
    p.runs_per_boot = 20;
    p.boot_scoped = {"executable", "lib_big"};

    auto uniform = [](std::uint64_t lo, std::uint64_t hi, unsigned align) {
        UniformBase u;
        u.lo = lo;
        u.hi = hi;
        u.align_bits = align;
        return u;
    };
    auto irwin_hall = [&](std::uint64_t lo) {
        TwoSource t;
        t.base = uniform(lo, lo + (1ull << 31), 16);
        t.plus_lo = 0;
        t.plus_hi = 1ull << 31;
        t.align_bits = 16;
        return t;
    };

    // Image region: everything executable shares one boot-scoped window at
    // 64KB granularity.
    ObjectPlacement executable;
    executable.name = "executable";
    executable.size_bytes = 0x100000;
    executable.mode = uniform(0x7ff800000000ull, 0x800000000000ull, 16);
    p.objects.push_back(executable);

    ObjectPlacement lib_big;
    lib_big.name = "lib_big";
    lib_big.size_bytes = 0x200000;
    lib_big.mode = uniform(0x7ff800000000ull, 0x800000000000ull, 16);
    p.objects.push_back(lib_big);

    ObjectPlacement heap;
    heap.name = "heap_M";
    heap.mode = irwin_hall(0x000100000000ull);
    p.objects.push_back(heap);

    ObjectPlacement malloc4k;
    malloc4k.name = "malloc_4KB_M_1";
    malloc4k.mode = irwin_hall(0x000300000000ull);
    p.objects.push_back(malloc4k);

    ObjectPlacement stack;
    stack.name = "stack_M";
    stack.mode = uniform(0x000040000000ull, 0x000040000000ull + (1ull << 40), 12);
    p.objects.push_back(stack);

    ObjectPlacement mmap_single;
    mmap_single.name = "mmap_single_M_1";
    mmap_single.mode = uniform(0x010000000000ull, 0x010000000000ull + (1ull << 37), 12);
    p.objects.push_back(mmap_single);

    return p;
}

} // namespace

PolicySpec builtin_policy(const std::string& name) {
    if (name == "linux-6.4-like") return linux_like(true);
    if (name == "linux-5.17-like") return linux_like(false);
    if (name == "windows-like") return windows_like();
    throw PolicyError("unknown builtin policy \"" + name + "\"");
}

std::vector<std::string> builtin_policy_names() {
    return {"linux-6.4-like", "linux-5.17-like", "windows-like"};
}

} // namespace aslrkit
