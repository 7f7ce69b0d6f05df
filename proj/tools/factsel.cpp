// factsel: fact extraction, prompt construction, repair sweeps, and analysis
// for LLM-based program repair experiments.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "factsel/corpus.hpp"
#include "factsel/fact_extract.hpp"
#include "factsel/llm_gateway.hpp"
#include "factsel/llm_http.hpp"
#include "factsel/maniple.hpp"
#include "factsel/metrics.hpp"
#include "factsel/prompt_engine.hpp"
#include "factsel/repair_runner.hpp"
#include "factsel/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Precedence: explicit flag > config file > environment. Secrets (the API
// key) are environment-only and never appear in config files.
struct CommonConfig {
    std::string endpoint;
    std::string model_id = "mock";
    std::string cache_dir;
    std::string sandbox_dir;
    int jobs = 1;

    void load_file(const fs::path& path) {
        json j = json::parse(factsel::detail::read_file(path));
        if (j.contains("endpoint")) endpoint = j["endpoint"].get<std::string>();
        if (j.contains("model_id")) model_id = j["model_id"].get<std::string>();
        if (j.contains("cache_dir")) cache_dir = j["cache_dir"].get<std::string>();
        if (j.contains("sandbox_dir")) sandbox_dir = j["sandbox_dir"].get<std::string>();
        if (j.contains("jobs")) jobs = j["jobs"].get<int>();
    }

    void load_env() {
        auto env = [](const char* k) -> std::optional<std::string> {
            const char* v = std::getenv(k);
            return v ? std::optional<std::string>(v) : std::nullopt;
        };
        if (auto v = env("FACTSEL_ENDPOINT")) endpoint = *v;
        if (auto v = env("FACTSEL_MODEL_ID")) model_id = *v;
        if (auto v = env("FACTSEL_CACHE_DIR")) cache_dir = *v;
        if (auto v = env("FACTSEL_SANDBOX_DIR")) sandbox_dir = *v;
        if (auto v = env("FACTSEL_JOBS")) jobs = std::stoi(*v);
    }
};

void write_output(const std::string& path, const std::string& body) {
    if (path.empty() || path == "-") {
        std::cout << body;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw factsel::Error("cannot write " + path);
    out << body;
}

std::vector<factsel::FactSet> parse_bits_list(const std::string& arg) {
    std::vector<factsel::FactSet> out;
    // Inline form: comma-separated bitvectors instead of a file path.
    if (arg.find_first_not_of("01,") == std::string::npos && !arg.empty()) {
        std::stringstream ss(arg);
        std::string bits;
        while (std::getline(ss, bits, ','))
            if (!bits.empty()) out.push_back(factsel::FactSet::parse(bits));
        return out;
    }
    std::ifstream in(arg);
    if (!in) throw factsel::Error("cannot read bits list " + arg);
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        out.push_back(factsel::FactSet::parse(line));
    }
    if (out.empty()) throw factsel::Error("bits list is empty: " + arg);
    return out;
}

factsel::Dataset load_results(const fs::path& path, std::vector<factsel::ResponseSet>* sets_out) {
    if (fs::is_directory(path)) {
        std::vector<factsel::ResponseSet> sets;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            sets.push_back(
                factsel::response_set_from_json(json::parse(factsel::detail::read_file(f))));
        if (sets.empty()) throw factsel::Error("no response sets under " + path.string());
        if (sets_out) *sets_out = sets;
        return factsel::dataset_from_response_sets(sets);
    }
    std::string text = factsel::detail::read_file(path);
    if (path.extension() == ".csv") {
        std::istringstream in(text);
        return factsel::dataset_from_csv(in);
    }
    return factsel::dataset_from_json(json::parse(text));
}

factsel::HyperGrid parse_grid(const fs::path& file) {
    factsel::HyperGrid grid;
    json j = json::parse(factsel::detail::read_file(file));
    if (j.contains("n_trees")) grid.n_trees = j["n_trees"].get<std::vector<int>>();
    if (j.contains("max_depth")) grid.max_depth = j["max_depth"].get<std::vector<int>>();
    if (j.contains("min_samples_leaf"))
        grid.min_samples_leaf = j["min_samples_leaf"].get<std::vector<int>>();
    if (j.contains("sqrt_features"))
        grid.sqrt_features = j["sqrt_features"].get<std::vector<bool>>();
    if (j.contains("length_modes")) {
        grid.length_modes.clear();
        for (const auto& m : j["length_modes"])
            grid.length_modes.push_back(m.get<std::string>() == "tokens"
                                            ? factsel::LengthMode::Tokens
                                            : factsel::LengthMode::Chars);
    }
    return grid;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fact selection toolkit for LLM-based program repair"};
    app.require_subcommand(1);

    CommonConfig base;
    base.load_env();
    std::string config_file;
    app.add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);

    // extract
    std::string x_corpus, x_bug, x_out;
    auto* cmd_extract = app.add_subcommand("extract", "emit extracted facts as JSON");
    cmd_extract->add_option("corpus", x_corpus, "corpus root directory")->required();
    cmd_extract->add_option("--bug", x_bug, "restrict to one bug id");
    cmd_extract->add_option("--out", x_out, "output file ('-' = stdout)");

    // prompt
    std::string p_corpus, p_bug, p_bits = "0000000", p_out;
    int p_order = 0;
    bool p_no_cot = false, p_no_imports = false;
    auto* cmd_prompt = app.add_subcommand("prompt", "render a repair prompt");
    cmd_prompt->add_option("corpus", p_corpus)->required();
    cmd_prompt->add_option("--bug", p_bug)->required();
    cmd_prompt->add_option("--bits", p_bits, "7-char fact bitvector");
    cmd_prompt->add_option("--order", p_order, "fact ordering index 0..119")
        ->check(CLI::Range(0, 119));
    cmd_prompt->add_flag("--no-cot", p_no_cot, "omit chain-of-thought instructions");
    cmd_prompt->add_flag("--no-imports", p_no_imports, "omit the import preamble");
    cmd_prompt->add_option("--out", p_out, "output file ('-' = stdout)");

    // sweep
    std::string s_corpus, s_bits_list, s_backend = "mock", s_results = "results",
                s_mock_script;
    bool s_bits_all = false;
    int s_n = 15, s_order = 0;
    long s_seed = 0;
    double s_temperature = 1.0;
    auto* cmd_sweep = app.add_subcommand("sweep", "run repair jobs over fact sets");
    cmd_sweep->add_option("corpus", s_corpus)->required();
    cmd_sweep->add_flag("--bits-all", s_bits_all, "all 128 fact sets per bug");
    cmd_sweep->add_option("--bits-list", s_bits_list, "comma-separated bitvectors, or a file with one per line");
    cmd_sweep->add_option("--n", s_n, "samples per job");
    cmd_sweep->add_option("--backend", s_backend, "mock or live")
        ->check(CLI::IsMember({"mock", "live"}));
    cmd_sweep->add_option("--mock-script", s_mock_script,
                          "JSON {prompt_hash: [responses...], \"default\": [..]}");
    cmd_sweep->add_option("--results", s_results, "response-set output directory");
    cmd_sweep->add_option("--order", s_order, "fact ordering index")->check(CLI::Range(0, 119));
    cmd_sweep->add_option("--seed", s_seed, "sampling seed");
    cmd_sweep->add_option("--temperature", s_temperature);
    std::string s_endpoint, s_model, s_cache, s_sandbox;
    int s_jobs = 0;
    cmd_sweep->add_option("--endpoint", s_endpoint);
    cmd_sweep->add_option("--model", s_model);
    cmd_sweep->add_option("--cache", s_cache, "response cache directory");
    cmd_sweep->add_option("--sandbox", s_sandbox, "sandbox root for validation");
    cmd_sweep->add_option("--jobs", s_jobs, "parallel jobs");

    // analyze
    std::string a_results, a_report, a_out, a_svg;
    int a_k = 1;
    auto* cmd_analyze = app.add_subcommand("analyze", "compute metrics reports");
    cmd_analyze->add_option("results", a_results, "results dir or dataset file")->required();
    cmd_analyze
        ->add_option("--report", a_report,
                     "gain|shapley|coverage|curve|upset|universality|order-hist")
        ->required()
        ->check(CLI::IsMember(
            {"gain", "shapley", "coverage", "curve", "upset", "universality", "order-hist"}));
    cmd_analyze->add_option("--k", a_k, "k for pass@k-based reports");
    cmd_analyze->add_option("--out", a_out, "CSV output file ('-' = stdout)");
    cmd_analyze->add_option("--svg", a_svg, "SVG output file (curve/upset)");

    // train
    std::string t_dataset, t_corpus, t_grid, t_out = "model.json", t_cv;
    long t_seed = 0;
    int t_top = 0, t_folds = 5;
    auto* cmd_train = app.add_subcommand("train", "train the fact-set ranking forest");
    cmd_train->add_option("dataset", t_dataset)->required();
    cmd_train->add_option("--corpus", t_corpus, "corpus root directory")->required();
    cmd_train->add_option("--grid", t_grid, "hyperparameter grid JSON");
    cmd_train->add_option("--seed", t_seed);
    cmd_train->add_option("--folds", t_folds, "cross-validation folds (grouped by bug)")
        ->check(CLI::Range(2, 100));
    cmd_train->add_option("--top", t_top, "restrict to the top-M bootstrap fact sets");
    cmd_train->add_option("--out", t_out, "model output file");
    cmd_train->add_option("--cv-report", t_cv, "CV report output file");

    // select
    std::string l_corpus, l_bug, l_model;
    bool l_emit_prompt = false;
    auto* cmd_select = app.add_subcommand("select", "rank fact sets for a bug");
    cmd_select->add_option("corpus", l_corpus)->required();
    cmd_select->add_option("--bug", l_bug)->required();
    cmd_select->add_option("--model", l_model)->required()->check(CLI::ExistingFile);
    cmd_select->add_flag("--emit-prompt", l_emit_prompt, "render the winning prompt");

    // baseline
    std::string b_which;
    auto* cmd_baseline = app.add_subcommand("baseline", "print a baseline bitvector");
    cmd_baseline->add_option("--which", b_which)
        ->required()
        ->check(CLI::IsMember({"t0", "t1", "t2", "t3"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_file.empty()) base.load_file(config_file);

        if (*cmd_extract) {
            factsel::Corpus corpus = factsel::load_corpus(x_corpus);
            json out = json::array();
            for (const auto& bug : corpus.bugs) {
                if (!x_bug.empty() && bug.bug_id != x_bug) continue;
                json j = factsel::extracted_facts_to_json(factsel::extract_all_facts(bug));
                j["bug_id"] = bug.bug_id;
                out.push_back(std::move(j));
            }
            if (out.empty()) throw factsel::Error("no such bug: " + x_bug);
            write_output(x_out, out.dump(2) + "\n");
        } else if (*cmd_prompt) {
            factsel::Corpus corpus = factsel::load_corpus(p_corpus);
            const factsel::BugRecord& bug = corpus.find(p_bug);
            factsel::Job job = factsel::make_job(bug, factsel::FactSet::parse(p_bits));
            factsel::PromptPlan plan{job, factsel::enumerate_orderings()[p_order], !p_no_cot,
                                     !p_no_imports};
            factsel::ExtractedFacts facts = factsel::extract_all_facts(bug);
            write_output(p_out, factsel::render(plan, facts).text);
        } else if (*cmd_sweep) {
            factsel::Corpus corpus = factsel::load_corpus(s_corpus);
            std::vector<factsel::FactSet> sets;
            if (s_bits_all) {
                for (int v = 0; v < 128; ++v) sets.push_back(factsel::FactSet{std::uint8_t(v)});
            } else if (!s_bits_list.empty()) {
                sets = parse_bits_list(s_bits_list);
            } else {
                throw factsel::Error("sweep needs --bits-all or --bits-list");
            }
            std::vector<factsel::Job> jobs;
            for (const auto& bug : corpus.bugs)
                for (factsel::FactSet set : sets) jobs.push_back(factsel::make_job(bug, set));

            factsel::QueryConfig cfg;
            cfg.endpoint_url = s_endpoint.empty() ? base.endpoint : s_endpoint;
            cfg.model_id = s_model.empty() ? base.model_id : s_model;
            cfg.temperature = s_temperature;
            cfg.n = s_n;
            cfg.seed = s_seed;
            cfg.max_parallel = s_jobs > 0 ? s_jobs : base.jobs;
            std::string cache = s_cache.empty() ? base.cache_dir : s_cache;
            if (!cache.empty()) cfg.cache_dir = cache;

            factsel::RunOptions opts;
            opts.results_dir = s_results;
            std::string sandbox = s_sandbox.empty() ? base.sandbox_dir : s_sandbox;
            opts.sandbox_root =
                sandbox.empty() ? fs::path(s_results) / "sandbox" : fs::path(sandbox);
            opts.parallel_jobs = s_jobs > 0 ? s_jobs : base.jobs;
            opts.fact_order = factsel::enumerate_orderings()[s_order];
            opts.order_index = s_order;

            std::unique_ptr<factsel::ChatBackend> backend;
            if (s_backend == "mock") {
                std::map<std::string, std::vector<std::string>> script;
                std::string fallback;
                if (!s_mock_script.empty()) {
                    json j = json::parse(factsel::detail::read_file(s_mock_script));
                    for (auto it = j.begin(); it != j.end(); ++it) {
                        auto vals = it.value().get<std::vector<std::string>>();
                        if (it.key() == "default" && !vals.empty()) fallback = vals[0];
                        else script[it.key()] = std::move(vals);
                    }
                }
                backend = std::make_unique<factsel::MockBackend>(std::move(script), fallback);
            } else {
                backend = std::make_unique<factsel::HttpChatBackend>();
            }
            factsel::RunSummary summary =
                factsel::run_jobs(jobs, corpus, cfg, *backend, opts);
            std::cerr << summary.response_sets.size() << " jobs completed, "
                      << summary.failures.size() << " failed\n";
            for (const auto& f : summary.failures)
                std::cerr << "  " << f.job.bug_id << " " << f.job.effective.to_string() << ": "
                          << f.message << "\n";
            if (!summary.failures.empty()) return 1;
        } else if (*cmd_analyze) {
            std::vector<factsel::ResponseSet> sets;
            factsel::Dataset dataset = load_results(a_results, &sets);
            std::string csv;
            std::string svg;
            if (a_report == "gain") {
                csv = factsel::gain_report_csv(factsel::fact_attribution_table(dataset, a_k));
            } else if (a_report == "shapley") {
                csv = factsel::shapley_report_csv(factsel::shapley_values(dataset, a_k));
            } else if (a_report == "coverage") {
                csv = factsel::coverage_report_csv(factsel::fixed_by_map(dataset));
            } else if (a_report == "curve") {
                auto curve = factsel::monotonicity_curve(dataset);
                csv = factsel::curve_report_csv(curve);
                if (!a_svg.empty()) svg = factsel::curve_svg(curve);
            } else if (a_report == "upset") {
                auto fixed_by = factsel::fixed_by_map(dataset);
                std::vector<factsel::FactSet> chosen;
                for (const auto& [set, bugs] : fixed_by)
                    if (!bugs.empty()) chosen.push_back(set);
                if (chosen.empty()) throw factsel::Error("no fact set fixed any bug");
                auto regions = factsel::upset_data(fixed_by, chosen);
                csv = factsel::upset_report_csv(regions);
                if (!a_svg.empty()) svg = factsel::upset_svg(regions, chosen);
            } else if (a_report == "universality") {
                csv = factsel::universality_report_csv(factsel::universality_gap(dataset));
            } else if (a_report == "order-hist") {
                if (sets.empty())
                    throw factsel::Error("order-hist needs a results directory, not a dataset");
                csv = factsel::order_histogram_csv(sets);
            }
            write_output(a_out, csv);
            if (!a_svg.empty()) write_output(a_svg, svg);
        } else if (*cmd_train) {
            factsel::Dataset dataset = load_results(t_dataset, nullptr);
            factsel::Corpus corpus = factsel::load_corpus(t_corpus);
            factsel::TrainOptions options;
            if (!t_grid.empty()) options.grid = parse_grid(t_grid);
            options.rng_seed = static_cast<std::uint64_t>(t_seed);
            options.folds = t_folds;
            if (t_top > 0)
                options.candidate_sets = factsel::top_fact_sets(dataset, t_top, 100, options.rng_seed);
            factsel::TrainResult result = factsel::train(dataset, corpus, options);
            write_output(t_out, factsel::model_to_json(result.model).dump(2) + "\n");
            if (!t_cv.empty()) {
                json cv = json::array();
                for (const auto& gp : result.cv_report.grid)
                    cv.push_back({{"n_trees", gp.hyperparams.n_trees},
                                  {"max_depth", gp.hyperparams.max_depth},
                                  {"min_samples_leaf", gp.hyperparams.min_samples_leaf},
                                  {"sqrt_features", gp.hyperparams.sqrt_features},
                                  {"length_mode",
                                   std::string(factsel::length_mode_name(gp.length_mode))},
                                  {"fold_accuracy", gp.fold_accuracy},
                                  {"mean_accuracy", gp.mean_accuracy}});
                json top = {{"grid", cv},
                            {"chosen",
                             {{"n_trees", result.cv_report.chosen.n_trees},
                              {"max_depth", result.cv_report.chosen.max_depth},
                              {"min_samples_leaf", result.cv_report.chosen.min_samples_leaf},
                              {"sqrt_features", result.cv_report.chosen.sqrt_features},
                              {"length_mode",
                               std::string(
                                   factsel::length_mode_name(result.cv_report.chosen_length_mode))},
                              {"mean_accuracy", result.cv_report.chosen_accuracy}}}};
                write_output(t_cv, top.dump(2) + "\n");
            }
            std::cerr << "model written to " << t_out << "\n";
        } else if (*cmd_select) {
            factsel::Corpus corpus = factsel::load_corpus(l_corpus);
            const factsel::BugRecord& bug = corpus.find(l_bug);
            factsel::ForestModel model =
                factsel::model_from_json(json::parse(factsel::detail::read_file(l_model)));
            auto ranked = factsel::select_facts(model, bug);
            for (const auto& r : ranked)
                std::cout << r.fact_set.to_string() << " " << r.score << "\n";
            if (l_emit_prompt) {
                factsel::Job job = factsel::make_job(bug, ranked.front().fact_set);
                factsel::PromptPlan plan{job};
                factsel::ExtractedFacts facts = factsel::extract_all_facts(bug);
                std::cout << "\n" << factsel::render(plan, facts).text;
            }
        } else if (*cmd_baseline) {
            // t3 pairs the failing test with its error message; t1 is the
            // static class context; t2 the issue report; t0 the bare function.
            std::map<std::string, std::string> baselines{
                {"t0", "0000000"}, {"t1", "1100000"}, {"t2", "0000001"}, {"t3", "0011000"}};
            std::cout << baselines.at(b_which) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
