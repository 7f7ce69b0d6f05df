#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "factsel/core.hpp"
#include "factsel/corpus.hpp"
#include "factsel/fact_extract.hpp"
#include "factsel/metrics.hpp"
#include "factsel/prompt_engine.hpp"

namespace factsel {

enum class LengthMode { Chars, Tokens };

inline std::string_view length_mode_name(LengthMode m) {
    return m == LengthMode::Chars ? "chars" : "tokens";
}

/// pass@1 discretized into success classes. The default three-way binning
/// (Fail = 0, Low = (0, 0.5], High = (0.5, 1]) is a documented choice; the
/// edges are a knob.
struct LabelBins {
    double low_edge = 0.0;
    double high_edge = 0.5;

    int label(double pass_at_1) const {
        if (pass_at_1 <= low_edge) return 0;
        if (pass_at_1 <= high_edge) return 1;
        return 2;
    }
    int num_classes() const { return 3; }
    std::vector<std::string> class_names() const { return {"fail", "low", "high"}; }
};

/// Frozen feature layout: [7 fact bits | repository one-hot | length | complexity].
struct FeatureSchema {
    int version = 1;
    std::vector<std::string> repositories; // sorted, from the training corpus
    LengthMode length_mode = LengthMode::Chars;

    int dimension() const { return kNumFacts + static_cast<int>(repositories.size()) + 2; }
};

struct FeatureVector {
    std::vector<double> values;
};

inline FeatureVector build_features(const Job& job, const BugRecord& bug,
                                    const RenderedPrompt& prompt, const FeatureSchema& schema,
                                    bool allow_unseen_repo = false) {
    FeatureVector fv;
    fv.values.reserve(schema.dimension());
    for (FactKind f : all_facts()) fv.values.push_back(job.effective.contains(f) ? 1.0 : 0.0);
    auto it = std::find(schema.repositories.begin(), schema.repositories.end(), bug.repository);
    if (it == schema.repositories.end() && !allow_unseen_repo)
        throw Error("repository '" + bug.repository + "' absent from feature schema");
    for (std::size_t i = 0; i < schema.repositories.size(); ++i)
        fv.values.push_back(it != schema.repositories.end() &&
                                    i == std::size_t(it - schema.repositories.begin())
                                ? 1.0
                                : 0.0);
    fv.values.push_back(double(schema.length_mode == LengthMode::Chars ? prompt.char_length
                                                                       : prompt.token_length));
    // Complexity depends on the bug only; recomputed here from its code.
    ExtractedFacts facts = extract_static_facts(bug);
    fv.values.push_back(double(facts.cyclomatic_complexity));
    return fv;
}

// ---------------------------------------------------------------------------
// Decision trees

struct TreeNode {
    bool leaf = true;
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> class_counts; // at leaves
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    int vote(const std::vector<double>& x) const {
        int at = 0;
        while (!nodes[at].leaf)
            at = x[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
        const auto& counts = nodes[at].class_counts;
        return static_cast<int>(std::max_element(counts.begin(), counts.end()) -
                                counts.begin()); // tie -> lower class
    }
};

struct Hyperparams {
    int n_trees = 100;
    int max_depth = 0; // 0 = unbounded
    int min_samples_leaf = 1;
    bool sqrt_features = true; // else all features

    bool operator==(const Hyperparams&) const = default;
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    Hyperparams hyperparams;
    std::vector<std::string> classes;
    FeatureSchema feature_schema;
    LabelBins bins;
    std::vector<FactSet> candidate_sets;
};

namespace detail {

// Deterministic across platforms: mt19937_64 is fully specified and we avoid
// the implementation-defined distributions.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

struct TreeBuilder {
    const std::vector<std::vector<double>>& x;
    const std::vector<int>& y;
    int num_classes;
    Hyperparams hp;
    std::mt19937_64 rng;
    DecisionTree tree;

    static double gini(const std::vector<double>& counts, double total) {
        if (total <= 0) return 0.0;
        double g = 1.0;
        for (double c : counts) g -= (c / total) * (c / total);
        return g;
    }

    int build(std::vector<int> samples, int depth) {
        std::vector<double> counts(num_classes, 0.0);
        for (int s : samples) counts[y[s]] += 1.0;
        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        bool pure = std::count_if(counts.begin(), counts.end(),
                                  [](double c) { return c > 0; }) <= 1;
        bool depth_stop = hp.max_depth > 0 && depth >= hp.max_depth;
        if (pure || depth_stop ||
            static_cast<int>(samples.size()) < 2 * hp.min_samples_leaf) {
            tree.nodes[node_id].class_counts = counts;
            return node_id;
        }

        int m = static_cast<int>(x[0].size());
        int try_features = hp.sqrt_features
                               ? std::max(1, static_cast<int>(std::sqrt(double(m))))
                               : m;
        std::vector<int> feats(m);
        std::iota(feats.begin(), feats.end(), 0);
        for (int i = 0; i < try_features; ++i) {
            int j = i + static_cast<int>(bounded(rng, std::uint64_t(m - i)));
            std::swap(feats[i], feats[j]);
        }

        double best_impurity = 1e18;
        int best_feature = -1;
        double best_threshold = 0;
        double total = double(samples.size());
        double parent = gini(counts, total);
        for (int fi = 0; fi < try_features; ++fi) {
            int f = feats[fi];
            std::vector<int> order = samples;
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                return x[a][f] < x[b][f] || (x[a][f] == x[b][f] && a < b);
            });
            std::vector<double> left(num_classes, 0.0);
            std::vector<double> right = counts;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                int s = order[i];
                left[y[s]] += 1.0;
                right[y[s]] -= 1.0;
                double lo = x[order[i]][f], hi = x[order[i + 1]][f];
                if (lo == hi) continue;
                double nl = double(i + 1), nr = total - nl;
                if (nl < hp.min_samples_leaf || nr < hp.min_samples_leaf) continue;
                double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
                if (impurity + 1e-12 < best_impurity) {
                    best_impurity = impurity;
                    best_feature = f;
                    best_threshold = (lo + hi) / 2.0;
                }
            }
        }
        if (best_feature < 0 || best_impurity >= parent - 1e-12) {
            tree.nodes[node_id].class_counts = counts;
            return node_id;
        }

        std::vector<int> left_samples, right_samples;
        for (int s : samples)
            (x[s][best_feature] <= best_threshold ? left_samples : right_samples).push_back(s);
        tree.nodes[node_id].leaf = false;
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        tree.nodes[node_id].left = build(std::move(left_samples), depth + 1);
        tree.nodes[node_id].right = build(std::move(right_samples), depth + 1);
        return node_id;
    }
};

inline DecisionTree train_tree(const std::vector<std::vector<double>>& x,
                               const std::vector<int>& y, int num_classes,
                               const Hyperparams& hp, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> bag(x.size());
    for (auto& s : bag) s = static_cast<int>(bounded(rng, x.size()));
    TreeBuilder builder{x, y, num_classes, hp, rng, {}};
    builder.build(std::move(bag), 0);
    return std::move(builder.tree);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace detail

inline std::vector<DecisionTree> train_forest(const std::vector<std::vector<double>>& x,
                                              const std::vector<int>& y, int num_classes,
                                              const Hyperparams& hp, std::uint64_t seed) {
    std::vector<DecisionTree> trees(hp.n_trees);
    for (int t = 0; t < hp.n_trees; ++t)
        trees[t] = detail::train_tree(x, y, num_classes, hp, detail::mix_seed(seed, t));
    return trees;
}

/// Tree-vote fractions per class; sums to one.
inline std::vector<double> predict(const ForestModel& model, const FeatureVector& fv) {
    if (static_cast<int>(fv.values.size()) != model.feature_schema.dimension())
        throw Error("feature vector dimension " + std::to_string(fv.values.size()) +
                    " does not match schema dimension " +
                    std::to_string(model.feature_schema.dimension()));
    std::vector<double> probs(model.classes.size(), 0.0);
    for (const auto& tree : model.trees) probs[tree.vote(fv.values)] += 1.0;
    for (auto& p : probs) p /= double(model.trees.size());
    return probs;
}

// ---------------------------------------------------------------------------
// Top fact sets by bootstrap aggregation

/// Bootstrap over bugs; per resample fact sets are ranked by mean pass@1,
/// ranks are averaged across resamples, and the best mean-rank sets win.
inline std::vector<FactSet> top_fact_sets(const Dataset& dataset, int top_m = 5,
                                          int n_boot = 100, std::uint64_t rng_seed = 0) {
    if (top_m < 1 || top_m > 128) throw Error("top_fact_sets: top_m must be in 1..128");
    std::vector<std::string> bugs = dataset.bug_ids();
    if (bugs.empty()) throw Error("top_fact_sets: empty dataset");
    std::map<std::string, std::map<FactSet, double>> per_bug;
    std::set<FactSet> sets_seen;
    for (const auto& e : dataset.entries) {
        per_bug[e.job.bug_id][e.job.effective] = e.pass_at_1;
        sets_seen.insert(e.job.effective);
    }
    std::vector<FactSet> sets(sets_seen.begin(), sets_seen.end());
    std::map<FactSet, double> rank_sum;
    std::mt19937_64 rng(rng_seed);
    for (int b = 0; b < n_boot; ++b) {
        std::map<FactSet, std::pair<double, int>> acc;
        for (std::size_t i = 0; i < bugs.size(); ++i) {
            const auto& bug = bugs[detail::bounded(rng, bugs.size())];
            for (const auto& [set, p] : per_bug[bug]) {
                acc[set].first += p;
                acc[set].second += 1;
            }
        }
        std::vector<std::pair<double, FactSet>> ranked;
        for (FactSet s : sets) {
            auto it = acc.find(s);
            double mean = it == acc.end() || it->second.second == 0
                              ? -1.0
                              : it->second.first / it->second.second;
            ranked.push_back({mean, s});
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.first > b.first || (a.first == b.first && a.second < b.second);
        });
        for (std::size_t r = 0; r < ranked.size(); ++r)
            rank_sum[ranked[r].second] += double(r + 1);
    }
    std::vector<FactSet> out = sets;
    std::sort(out.begin(), out.end(), [&](FactSet a, FactSet b) {
        return rank_sum[a] < rank_sum[b] || (rank_sum[a] == rank_sum[b] && a < b);
    });
    if (static_cast<int>(out.size()) > top_m) out.resize(top_m);
    return out;
}

// ---------------------------------------------------------------------------
// Training with grid search and grouped cross-validation

struct HyperGrid {
    std::vector<int> n_trees{100, 300};
    std::vector<int> max_depth{0, 8, 16};
    std::vector<int> min_samples_leaf{1, 5};
    std::vector<bool> sqrt_features{true, false};
    std::vector<LengthMode> length_modes{LengthMode::Chars, LengthMode::Tokens};
};

struct GridPointReport {
    Hyperparams hyperparams;
    LengthMode length_mode = LengthMode::Chars;
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0;
};

struct CvReport {
    std::vector<GridPointReport> grid;
    Hyperparams chosen;
    LengthMode chosen_length_mode = LengthMode::Chars;
    double chosen_accuracy = 0;
};

struct TrainResult {
    ForestModel model;
    CvReport cv_report;
};

struct TrainOptions {
    HyperGrid grid;
    LabelBins bins;
    std::vector<FactSet> candidate_sets; // empty = use every set in the dataset
    std::uint64_t rng_seed = 0;
    int folds = 5;
};

/// Grid-searched random forest over the dataset's jobs. Folds are grouped by
/// bug so no bug's rows leak across the train/validation split; cross-
/// validation also decides whether characters or tokens measure length.
inline TrainResult train(const Dataset& dataset, const Corpus& corpus,
                         const TrainOptions& options,
                         const SourceParser& parser = default_parser()) {
    std::vector<const DatasetEntry*> rows;
    for (const auto& e : dataset.entries) {
        if (!options.candidate_sets.empty() &&
            std::find(options.candidate_sets.begin(), options.candidate_sets.end(),
                      e.job.effective) == options.candidate_sets.end())
            continue;
        rows.push_back(&e);
    }
    if (rows.empty()) throw Error("train: no rows after candidate-set restriction");

    // Schema repositories from the corpus, sorted for stability.
    FeatureSchema schema;
    {
        std::set<std::string> repos;
        for (const auto& b : corpus.bugs) repos.insert(b.repository);
        schema.repositories.assign(repos.begin(), repos.end());
    }

    // Features are rendered once per (bug, set); both length measures are
    // kept so the grid can switch modes without re-rendering.
    std::map<std::string, ExtractedFacts> facts_cache;
    std::vector<std::vector<double>> base; // without the length column filled
    std::vector<double> char_len, tok_len;
    std::vector<int> labels;
    std::vector<std::string> row_bug;
    for (const auto* e : rows) {
        const BugRecord& bug = corpus.find(e->job.bug_id);
        auto [it, fresh] = facts_cache.try_emplace(bug.bug_id);
        if (fresh) it->second = extract_all_facts(bug, parser);
        PromptPlan plan{e->job};
        RenderedPrompt prompt = render(plan, it->second);
        std::vector<double> v;
        for (FactKind f : all_facts()) v.push_back(e->job.effective.contains(f) ? 1.0 : 0.0);
        for (const auto& r : schema.repositories) v.push_back(r == bug.repository ? 1.0 : 0.0);
        v.push_back(0.0); // length, per mode
        v.push_back(double(it->second.cyclomatic_complexity));
        base.push_back(std::move(v));
        char_len.push_back(double(prompt.char_length));
        tok_len.push_back(double(prompt.token_length));
        labels.push_back(options.bins.label(e->pass_at_1));
        row_bug.push_back(e->job.bug_id);
    }
    if (std::set<int>(labels.begin(), labels.end()).size() < 2)
        throw Error("train: degenerate single-class data");

    // Grouped folds: shuffle distinct bugs, deal them round-robin.
    std::vector<std::string> bug_list;
    for (const auto& b : row_bug)
        if (std::find(bug_list.begin(), bug_list.end(), b) == bug_list.end())
            bug_list.push_back(b);
    if (static_cast<int>(bug_list.size()) < options.folds)
        throw Error("train: need at least " + std::to_string(options.folds) + " distinct bugs");
    std::sort(bug_list.begin(), bug_list.end());
    std::mt19937_64 fold_rng(detail::mix_seed(options.rng_seed, 0xf01d));
    for (std::size_t i = bug_list.size(); i > 1; --i)
        std::swap(bug_list[i - 1], bug_list[detail::bounded(fold_rng, i)]);
    std::map<std::string, int> fold_of;
    for (std::size_t i = 0; i < bug_list.size(); ++i)
        fold_of[bug_list[i]] = static_cast<int>(i % options.folds);

    auto matrix_for = [&](LengthMode mode) {
        std::vector<std::vector<double>> x = base;
        const auto& len = mode == LengthMode::Chars ? char_len : tok_len;
        std::size_t len_col = kNumFacts + schema.repositories.size();
        for (std::size_t i = 0; i < x.size(); ++i) x[i][len_col] = len[i];
        return x;
    };

    CvReport report;
    int num_classes = options.bins.num_classes();
    for (LengthMode mode : options.grid.length_modes) {
        auto x = matrix_for(mode);
        for (int nt : options.grid.n_trees)
            for (int depth : options.grid.max_depth)
                for (int leaf : options.grid.min_samples_leaf)
                    for (bool sqrtf : options.grid.sqrt_features) {
                        Hyperparams hp{nt, depth, leaf, sqrtf};
                        GridPointReport gp;
                        gp.hyperparams = hp;
                        gp.length_mode = mode;
                        for (int fold = 0; fold < options.folds; ++fold) {
                            std::vector<std::vector<double>> xt;
                            std::vector<int> yt;
                            std::vector<int> val_rows;
                            for (std::size_t i = 0; i < x.size(); ++i) {
                                if (fold_of[row_bug[i]] == fold) {
                                    val_rows.push_back(static_cast<int>(i));
                                } else {
                                    xt.push_back(x[i]);
                                    yt.push_back(labels[i]);
                                }
                            }
                            auto trees = train_forest(
                                xt, yt, num_classes, hp,
                                detail::mix_seed(options.rng_seed, 1000 + fold));
                            int hits = 0;
                            for (int i : val_rows) {
                                std::vector<double> votes(num_classes, 0.0);
                                for (const auto& t : trees) votes[t.vote(x[i])] += 1.0;
                                int pred = static_cast<int>(
                                    std::max_element(votes.begin(), votes.end()) -
                                    votes.begin());
                                hits += pred == labels[i];
                            }
                            gp.fold_accuracy.push_back(
                                val_rows.empty() ? 0.0 : double(hits) / val_rows.size());
                        }
                        for (double a : gp.fold_accuracy) gp.mean_accuracy += a;
                        gp.mean_accuracy /= double(gp.fold_accuracy.size());
                        report.grid.push_back(std::move(gp));
                    }
    }

    // Best mean accuracy; ties prefer fewer trees, then shallower models
    // (bounded depth beats unbounded), then the earlier grid point.
    auto depth_key = [](int d) { return d == 0 ? std::numeric_limits<int>::max() : d; };
    const GridPointReport* best = &report.grid.front();
    for (const auto& gp : report.grid) {
        if (gp.mean_accuracy > best->mean_accuracy + 1e-12) best = &gp;
        else if (std::fabs(gp.mean_accuracy - best->mean_accuracy) <= 1e-12) {
            if (gp.hyperparams.n_trees < best->hyperparams.n_trees ||
                (gp.hyperparams.n_trees == best->hyperparams.n_trees &&
                 depth_key(gp.hyperparams.max_depth) < depth_key(best->hyperparams.max_depth)))
                best = &gp;
        }
    }
    report.chosen = best->hyperparams;
    report.chosen_length_mode = best->length_mode;
    report.chosen_accuracy = best->mean_accuracy;

    ForestModel model;
    model.hyperparams = report.chosen;
    model.classes = options.bins.class_names();
    schema.length_mode = report.chosen_length_mode;
    model.feature_schema = schema;
    model.bins = options.bins;
    if (!options.candidate_sets.empty()) {
        model.candidate_sets = options.candidate_sets;
    } else {
        std::set<FactSet> seen;
        for (const auto* e : rows) seen.insert(e->job.effective);
        model.candidate_sets.assign(seen.begin(), seen.end());
    }
    auto x = matrix_for(report.chosen_length_mode);
    model.trees = train_forest(x, labels, num_classes, model.hyperparams,
                               detail::mix_seed(options.rng_seed, 0xf17a1));
    return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// Selection

struct RankedFactSet {
    FactSet fact_set;
    double score = 0; // probability mass of the highest success class
};

/// Maniple's recommendation: rank the model's candidate sets for this bug by
/// the predicted probability of the highest success class.
inline std::vector<RankedFactSet> select_facts(const ForestModel& model, const BugRecord& bug,
                                               const SourceParser& parser = default_parser()) {
    ExtractedFacts facts = extract_all_facts(bug, parser);
    FactSet mask = availability_mask(bug, facts);
    std::vector<RankedFactSet> out;
    std::set<FactSet> seen;
    std::string last_error = "no candidate sets";
    for (FactSet candidate : model.candidate_sets) {
        FactSet effective = candidate & mask;
        if (!seen.insert(effective).second) continue;
        try {
            Job job{bug.bug_id, candidate, effective};
            PromptPlan plan{job};
            RenderedPrompt prompt = render(plan, facts);
            FeatureVector fv =
                build_features(job, bug, prompt, model.feature_schema, /*allow_unseen_repo=*/true);
            std::vector<double> probs = predict(model, fv);
            out.push_back({effective, probs.back()});
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    if (out.empty()) throw Error("select_facts: no candidate renderable: " + last_error);
    std::sort(out.begin(), out.end(), [](const RankedFactSet& a, const RankedFactSet& b) {
        return a.score > b.score || (a.score == b.score && a.fact_set < b.fact_set);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Serialization (versioned JSON, reloadable bit-exactly)

inline nlohmann::json model_to_json(const ForestModel& model) {
    nlohmann::json j;
    j["format"] = "factsel-forest";
    j["version"] = 1;
    j["hyperparams"] = {{"n_trees", model.hyperparams.n_trees},
                        {"max_depth", model.hyperparams.max_depth},
                        {"min_samples_leaf", model.hyperparams.min_samples_leaf},
                        {"sqrt_features", model.hyperparams.sqrt_features}};
    j["classes"] = model.classes;
    j["schema"] = {{"version", model.feature_schema.version},
                   {"repositories", model.feature_schema.repositories},
                   {"length_mode", std::string(length_mode_name(model.feature_schema.length_mode))}};
    j["bins"] = {{"low_edge", model.bins.low_edge}, {"high_edge", model.bins.high_edge}};
    j["candidate_sets"] = nlohmann::json::array();
    for (FactSet s : model.candidate_sets) j["candidate_sets"].push_back(s.to_string());
    j["trees"] = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        nlohmann::json tj = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            nlohmann::json nj;
            nj["leaf"] = n.leaf;
            if (n.leaf) {
                nj["counts"] = n.class_counts;
            } else {
                nj["feature"] = n.feature;
                nj["threshold"] = n.threshold;
                nj["left"] = n.left;
                nj["right"] = n.right;
            }
            tj.push_back(std::move(nj));
        }
        j["trees"].push_back(std::move(tj));
    }
    return j;
}

inline ForestModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "factsel-forest")
        throw Error("not a factsel forest model file");
    ForestModel model;
    const auto& hp = j.at("hyperparams");
    model.hyperparams = {hp.at("n_trees").get<int>(), hp.at("max_depth").get<int>(),
                         hp.at("min_samples_leaf").get<int>(),
                         hp.at("sqrt_features").get<bool>()};
    model.classes = j.at("classes").get<std::vector<std::string>>();
    const auto& sc = j.at("schema");
    model.feature_schema.version = sc.at("version").get<int>();
    model.feature_schema.repositories = sc.at("repositories").get<std::vector<std::string>>();
    model.feature_schema.length_mode =
        sc.at("length_mode").get<std::string>() == "tokens" ? LengthMode::Tokens
                                                            : LengthMode::Chars;
    model.bins.low_edge = j.at("bins").at("low_edge").get<double>();
    model.bins.high_edge = j.at("bins").at("high_edge").get<double>();
    for (const auto& s : j.at("candidate_sets"))
        model.candidate_sets.push_back(FactSet::parse(s.get<std::string>()));
    for (const auto& tj : j.at("trees")) {
        DecisionTree tree;
        for (const auto& nj : tj) {
            TreeNode n;
            n.leaf = nj.at("leaf").get<bool>();
            if (n.leaf) {
                n.class_counts = nj.at("counts").get<std::vector<double>>();
            } else {
                n.feature = nj.at("feature").get<int>();
                n.threshold = nj.at("threshold").get<double>();
                n.left = nj.at("left").get<int>();
                n.right = nj.at("right").get<int>();
            }
            tree.nodes.push_back(std::move(n));
        }
        for (const auto& n : tree.nodes)
            if (!n.leaf && (n.feature < 0 || n.feature >= model.feature_schema.dimension() ||
                            n.left < 0 || n.right < 0 ||
                            n.left >= static_cast<int>(tree.nodes.size()) ||
                            n.right >= static_cast<int>(tree.nodes.size())))
                throw Error("forest model: invalid split node");
        model.trees.push_back(std::move(tree));
    }
    return model;
}

} // namespace factsel
