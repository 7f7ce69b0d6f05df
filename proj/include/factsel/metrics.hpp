#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "factsel/core.hpp"
#include "factsel/corpus.hpp"

namespace factsel {

// ---------------------------------------------------------------------------
// pass@k

namespace detail {

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    }
    return r;
}

} // namespace detail

struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    double value() const { return double(num) / double(den); }
    bool operator==(const Rational& o) const {
        return static_cast<unsigned __int128>(num) * o.den ==
               static_cast<unsigned __int128>(o.num) * den;
    }
};

/// Exact pass@k as a rational: 1 - C(n-C, k) / C(n, k).
inline Rational pass_at_k_exact(int n, int successes, int k) {
    if (n < 1 || successes < 0 || successes > n)
        throw Error("pass@k requires 0 <= C <= n");
    if (k < 1 || k > n) throw Error("pass@k requires 1 <= k <= n");
    std::uint64_t total = detail::binomial(n, k);
    std::uint64_t misses = detail::binomial(n - successes, k);
    return Rational{total - misses, total};
}

inline double pass_at_k(int n, int successes, int k) {
    return pass_at_k_exact(n, successes, k).value();
}

/// Smallest increment the pass@k estimator can resolve: 1 / C(n, k).
inline double granularity(int n, int k) {
    if (k < 1 || k > n) throw Error("granularity requires 1 <= k <= n");
    return 1.0 / double(detail::binomial(n, k));
}

inline int num_fixed(const std::vector<ResponseSet>& sets) {
    std::set<std::string> fixed;
    for (const auto& rs : sets)
        if (rs.successes() > 0) fixed.insert(rs.job.bug_id);
    return static_cast<int>(fixed.size());
}

// ---------------------------------------------------------------------------
// Fact gain and Shapley

/// Relative change in mean pass@k between entries containing the fact and
/// entries not containing it.
inline double fact_gain(const Dataset& dataset, FactKind fact, int k = 1) {
    double with_sum = 0, without_sum = 0;
    int with_n = 0, without_n = 0;
    for (const auto& e : dataset.entries) {
        double p = pass_at_k(e.n, e.successes, k);
        if (e.job.effective.contains(fact)) {
            with_sum += p;
            ++with_n;
        } else {
            without_sum += p;
            ++without_n;
        }
    }
    if (with_n == 0 || without_n == 0)
        throw Error("fact_gain needs entries both with and without " +
                    std::string(fact_name(fact)));
    double with_mean = with_sum / with_n;
    double without_mean = without_sum / without_n;
    if (without_mean == 0.0)
        throw Error("fact_gain: no baseline successes for " + std::string(fact_name(fact)));
    return (with_mean - without_mean) / without_mean;
}

struct ShapleyResult {
    std::map<FactKind, double> values;
    std::map<FactKind, double> scaled; // x16 reporting scale
    double grand_value = 0.0;          // v(all facts)
    double empty_value = 0.0;          // v(empty set)
};

/// Exact Shapley values over the 2^7 coalition lattice for an arbitrary
/// characteristic function v.
inline ShapleyResult shapley_exhaustive(const std::function<double(FactSet)>& v) {
    std::array<double, 128> val{};
    for (int s = 0; s < 128; ++s) val[s] = v(FactSet(std::uint8_t(s)));

    std::array<double, kNumFacts + 1> weight{};
    double n_fact = 1;
    for (int i = 2; i <= kNumFacts; ++i) n_fact *= i; // 7!
    for (int s = 0; s <= kNumFacts - 1; ++s) {
        double s_fact = 1, rest_fact = 1;
        for (int i = 2; i <= s; ++i) s_fact *= i;
        for (int i = 2; i <= kNumFacts - 1 - s; ++i) rest_fact *= i;
        weight[s] = s_fact * rest_fact / n_fact;
    }

    ShapleyResult out;
    out.grand_value = val[127];
    out.empty_value = val[0];
    for (FactKind f : all_facts()) {
        double phi = 0;
        for (int s = 0; s < 128; ++s) {
            FactSet coal{std::uint8_t(s)};
            if (coal.contains(f)) continue;
            FactSet with = coal.with(f);
            phi += weight[coal.count()] * (val[with.value()] - val[coal.value()]);
        }
        out.values[f] = phi;
        out.scaled[f] = phi * 16.0;
    }
    return out;
}

/// Shapley over a dataset: v(S) = mean pass@k over entries whose effective
/// set is exactly S. Every subset must be populated, since the values are
/// only exact over the full lattice; missing subsets are an error, not imputed.
inline ShapleyResult shapley_values(const Dataset& dataset, int k = 1) {
    std::array<double, 128> sum{};
    std::array<int, 128> cnt{};
    for (const auto& e : dataset.entries) {
        sum[e.job.effective.value()] += pass_at_k(e.n, e.successes, k);
        cnt[e.job.effective.value()] += 1;
    }
    std::vector<std::string> missing;
    for (int s = 0; s < 128; ++s)
        if (cnt[s] == 0) missing.push_back(FactSet(std::uint8_t(s)).to_string());
    if (!missing.empty()) {
        std::string msg = "shapley_values: missing subsets:";
        for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 8); ++i)
            msg += " " + missing[i];
        if (missing.size() > 8) msg += " (+" + std::to_string(missing.size() - 8) + " more)";
        throw Error(msg);
    }
    return shapley_exhaustive(
        [&](FactSet s) { return sum[s.value()] / cnt[s.value()]; });
}

// ---------------------------------------------------------------------------
// Coverage and exclusivity

/// |Coverage(F)| / |union of all coverages|.
inline double coverage_ratio(const std::map<FactSet, std::set<std::string>>& fixed_by,
                             FactSet F) {
    std::set<std::string> all;
    for (const auto& [_, bugs] : fixed_by) all.insert(bugs.begin(), bugs.end());
    if (all.empty()) throw Error("coverage_ratio: no bug is fixed by any fact set");
    auto it = fixed_by.find(F);
    std::size_t covered = it == fixed_by.end() ? 0 : it->second.size();
    return double(covered) / double(all.size());
}

inline std::map<FactSet, std::set<std::string>> fixed_by_map(const Dataset& dataset) {
    std::map<FactSet, std::set<std::string>> out;
    for (const auto& e : dataset.entries)
        if (e.successes > 0) out[e.job.effective].insert(e.job.bug_id);
    return out;
}

struct ExclusivityReport {
    int exclusive_fixes = 0;  // bugs fixed only via sets containing the fact
    double best_without = 0;  // mean over bugs of best pass@1 excluding the fact
    double best_overall = 0;  // mean over bugs of best pass@1, all sets
    double delta = 0;         // best_overall - best_without, always >= 0
};

inline ExclusivityReport exclusivity_and_delta(const Dataset& dataset, FactKind fact) {
    ExclusivityReport rep;
    std::map<std::string, std::pair<double, double>> best; // bug -> (overall, without)
    std::map<std::string, std::pair<bool, bool>> fixed;    // bug -> (with fact, without)
    for (const auto& e : dataset.entries) {
        auto& b = best[e.job.bug_id];
        auto& fx = fixed[e.job.bug_id];
        b.first = std::max(b.first, e.pass_at_1);
        if (!e.job.effective.contains(fact)) b.second = std::max(b.second, e.pass_at_1);
        if (e.successes > 0) {
            if (e.job.effective.contains(fact)) fx.first = true;
            else fx.second = true;
        }
    }
    if (best.empty()) throw Error("exclusivity_and_delta: empty dataset");
    for (const auto& [bug, fx] : fixed)
        if (fx.first && !fx.second) ++rep.exclusive_fixes;
    for (const auto& [bug, b] : best) {
        rep.best_overall += b.first;
        rep.best_without += b.second;
    }
    rep.best_overall /= double(best.size());
    rep.best_without /= double(best.size());
    rep.delta = rep.best_overall - rep.best_without;
    return rep;
}

// ---------------------------------------------------------------------------
// Monotonicity curve

struct CurvePoint {
    int cardinality = 0;
    double max_pass1 = 0; // mean over bugs of per-bug max at this cardinality
    double avg_pass1 = 0; // mean over entries
    bool populated = true;
};

inline std::vector<CurvePoint> monotonicity_curve(const Dataset& dataset) {
    std::vector<CurvePoint> curve;
    for (int c = 0; c <= kNumFacts; ++c) {
        CurvePoint pt;
        pt.cardinality = c;
        double sum = 0;
        int cnt = 0;
        std::map<std::string, double> per_bug_max;
        for (const auto& e : dataset.entries) {
            if (e.job.effective.count() != c) continue;
            sum += e.pass_at_1;
            ++cnt;
            auto [it, fresh] = per_bug_max.try_emplace(e.job.bug_id, e.pass_at_1);
            if (!fresh) it->second = std::max(it->second, e.pass_at_1);
        }
        if (cnt == 0) {
            pt.populated = false;
        } else {
            pt.avg_pass1 = sum / cnt;
            for (const auto& [_, m] : per_bug_max) pt.max_pass1 += m;
            pt.max_pass1 /= double(per_bug_max.size());
        }
        curve.push_back(pt);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Upset intersections

struct UpsetRegion {
    std::vector<FactSet> members; // the chosen sets this region belongs to
    int count = 0;
};

/// Exact Venn partition of the coverage union over the chosen sets.
inline std::vector<UpsetRegion> upset_data(
    const std::map<FactSet, std::set<std::string>>& fixed_by,
    const std::vector<FactSet>& chosen) {
    if (chosen.empty()) throw Error("upset_data: chosen sets must be non-empty");
    std::set<std::string> universe;
    for (FactSet f : chosen) {
        auto it = fixed_by.find(f);
        if (it != fixed_by.end()) universe.insert(it->second.begin(), it->second.end());
    }
    std::map<std::vector<bool>, int> regions;
    for (const auto& bug : universe) {
        std::vector<bool> sig;
        for (FactSet f : chosen) {
            auto it = fixed_by.find(f);
            sig.push_back(it != fixed_by.end() && it->second.count(bug) > 0);
        }
        regions[sig] += 1;
    }
    std::vector<UpsetRegion> out;
    for (const auto& [sig, count] : regions) {
        UpsetRegion r;
        for (std::size_t i = 0; i < chosen.size(); ++i)
            if (sig[i]) r.members.push_back(chosen[i]);
        r.count = count;
        out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(),
              [](const UpsetRegion& a, const UpsetRegion& b) { return a.count > b.count; });
    return out;
}

// ---------------------------------------------------------------------------
// Universality gap

struct UniversalityGap {
    FactSet best_universal;
    std::map<std::string, double> per_bug_epsilon; // bug-optimal minus universal
};

/// best_universal maximises the summed pass@1 across bugs (ties break to the
/// lowest bitvector); epsilon is each bug's loss relative to its own optimum.
inline UniversalityGap universality_gap(const Dataset& dataset) {
    if (dataset.entries.empty()) throw Error("universality_gap: empty dataset");
    std::map<FactSet, double> totals;
    std::map<std::string, std::map<FactSet, double>> per_bug;
    for (const auto& e : dataset.entries) {
        totals[e.job.effective] += e.pass_at_1;
        per_bug[e.job.bug_id][e.job.effective] = e.pass_at_1;
    }
    UniversalityGap out;
    double best = -1;
    for (const auto& [set, total] : totals) {
        if (total > best) {
            best = total;
            out.best_universal = set;
        }
    }
    for (const auto& [bug, scores] : per_bug) {
        double own_best = 0;
        for (const auto& [_, p] : scores) own_best = std::max(own_best, p);
        auto it = scores.find(out.best_universal);
        double universal = it == scores.end() ? 0.0 : it->second;
        out.per_bug_epsilon[bug] = own_best - universal;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bootstrap variance

/// Standard deviation of pass@k over bootstrap resamples of the response
/// pool. Deterministic under the seed.
inline double bootstrap_std(const std::vector<bool>& responses, int n_resample, int repeats,
                            int k, std::uint64_t rng_seed) {
    if (responses.empty()) throw Error("bootstrap_std: empty response pool");
    if (n_resample < 1 || repeats < 1) throw Error("bootstrap_std: bad resample parameters");
    std::mt19937_64 rng(rng_seed);
    std::uniform_int_distribution<std::size_t> pick(0, responses.size() - 1);
    std::vector<double> stats;
    stats.reserve(repeats);
    for (int r = 0; r < repeats; ++r) {
        int successes = 0;
        for (int i = 0; i < n_resample; ++i) successes += responses[pick(rng)];
        stats.push_back(pass_at_k(n_resample, successes, std::min(k, n_resample)));
    }
    double mean = 0;
    for (double s : stats) mean += s;
    mean /= stats.size();
    double var = 0;
    for (double s : stats) var += (s - mean) * (s - mean);
    var /= stats.size();
    return std::sqrt(var);
}

} // namespace factsel
