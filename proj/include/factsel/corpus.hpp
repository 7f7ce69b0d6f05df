#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "factsel/core.hpp"
#include "factsel/sha256.hpp"

namespace factsel {

struct FailingTest {
    std::string test_file_path;
    std::string test_code;
};

struct IssueText {
    std::string title;
    std::string body;
};

/// One benchmark bug, loaded from a per-bug directory with a JSON manifest.
struct BugRecord {
    std::string bug_id; // "project:number"
    std::string repository;
    std::string source_file_path;
    int span_begin = 0; // 1-based, inclusive
    int span_end = 0;
    std::string source_text;
    std::vector<FailingTest> failing_tests;
    std::string error_text;
    std::optional<std::filesystem::path> runtime_trace_path;
    std::optional<std::filesystem::path> angelic_trace_path;
    std::optional<IssueText> issue;
    std::vector<std::string> imports;
    std::string test_command; // exits 0 iff tests pass
    std::filesystem::path bug_dir; // directory the bug was loaded from
};

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    // A trailing newline does not produce a phantom line.
    if (!lines.empty() && lines.back().empty() && !text.empty() && text.back() == '\n')
        lines.pop_back();
    return lines;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline bool nonempty_file(const std::filesystem::path& p) {
    std::error_code ec;
    return std::filesystem::exists(p, ec) && std::filesystem::file_size(p, ec) > 0;
}

} // namespace detail

/// Which facts this bug can actually provide. Derived from the artifacts, not
/// stored: a fact is available iff its source artifact exists and is non-empty.
/// BuggyClass uses the indentation of the function header as a method heuristic;
/// extraction refines the static-fact bits where it runs.
inline FactSet availability_mask(const BugRecord& bug) {
    FactSet m;
    auto lines = detail::split_lines(bug.source_text);
    if (bug.span_begin >= 1 && bug.span_begin <= static_cast<int>(lines.size())) {
        const std::string& first = lines[bug.span_begin - 1];
        std::size_t indent = first.find_first_not_of(" \t");
        if (indent != std::string::npos && indent > 0) m = m.with(FactKind::BuggyClass);
    }
    // Same-file callee signatures cannot be ruled out without parsing.
    m = m.with(FactKind::UsedMethodSignatures);
    if (!bug.failing_tests.empty()) m = m.with(FactKind::FailingTest);
    if (!bug.error_text.empty()) m = m.with(FactKind::ErrorInfo);
    if (bug.runtime_trace_path && detail::nonempty_file(*bug.runtime_trace_path))
        m = m.with(FactKind::RuntimeInfo);
    if (bug.angelic_trace_path && detail::nonempty_file(*bug.angelic_trace_path))
        m = m.with(FactKind::AngelicForest);
    if (bug.issue && !(bug.issue->title.empty() && bug.issue->body.empty()))
        m = m.with(FactKind::GitHubIssue);
    return m;
}

inline FactSet effective_fact_set(FactSet requested, FactSet availability) {
    return requested & availability;
}

inline FactSet effective_fact_set(FactSet requested, const BugRecord& bug) {
    return requested & availability_mask(bug);
}

inline Job make_job(const BugRecord& bug, FactSet requested) {
    return Job{bug.bug_id, requested, effective_fact_set(requested, bug)};
}

/// One job per distinct (bug_id, effective) pair, stable by first occurrence.
inline std::vector<Job> dedupe_jobs(const std::vector<Job>& jobs) {
    std::vector<Job> out;
    std::set<std::pair<std::string, std::uint8_t>> seen;
    for (const Job& j : jobs)
        if (seen.insert({j.bug_id, j.effective.value()}).second) out.push_back(j);
    return out;
}

struct LlmResponse {
    std::string raw_text;
    std::optional<std::string> patch;
    Verdict verdict = Verdict::PatchExtractionFail;
};

struct SamplingParams {
    double temperature = 1.0;
    std::optional<long> seed;
    int n = 15;
};

struct ResponseSet {
    Job job;
    std::string model_id;
    SamplingParams params;
    std::vector<LlmResponse> responses;
    int order_index = 0; // index into enumerate_orderings(); 0 = canonical

    int successes() const {
        int c = 0;
        for (const auto& r : responses) c += r.verdict == Verdict::Plausible;
        return c;
    }
};

struct CorrectnessLabel {
    std::string bug_id;
    std::string patch_hash;
    std::vector<int> rater_scores; // each 0..3
    int final_score = 0;
    bool correct = false;
};

/// Resolve rater scores: agreement wins; an unresolved disagreement takes the
/// more conservative (lower) score. Correct means final score >= 2.
inline CorrectnessLabel resolve_label(std::string bug_id, std::string patch_hash,
                                      std::vector<int> rater_scores) {
    if (rater_scores.empty()) throw Error("label needs at least one rater score");
    for (int s : rater_scores)
        if (s < 0 || s > 3) throw Error("rater score out of 0..3");
    CorrectnessLabel l;
    l.bug_id = std::move(bug_id);
    l.patch_hash = std::move(patch_hash);
    l.rater_scores = std::move(rater_scores);
    l.final_score = *std::min_element(l.rater_scores.begin(), l.rater_scores.end());
    l.correct = l.final_score >= 2;
    return l;
}

/// Patch identity: trailing whitespace stripped per line, LF-normalized,
/// then content hashed. Keeps label joins stable across runs.
inline std::string patch_hash(std::string_view patch) {
    std::string norm;
    norm.reserve(patch.size());
    std::string line;
    auto flush = [&] {
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        norm += line;
        norm += '\n';
        line.clear();
    };
    for (char c : patch) {
        if (c == '\n') flush();
        else line.push_back(c);
    }
    if (!line.empty()) flush();
    return Sha256::hex(norm);
}

struct DatasetEntry {
    Job job;
    int n = 0;
    int successes = 0;
    double pass_at_1 = 0.0; // always successes / n
};

/// Per-(bug, effective set) pass@1 observations; the substrate for every
/// analysis in metrics.hpp and for Maniple training.
struct Dataset {
    std::vector<DatasetEntry> entries;

    void add(Job job, int n, int successes) {
        if (n <= 0 || successes < 0 || successes > n)
            throw Error("dataset entry needs 0 <= successes <= n, n > 0");
        for (const auto& e : entries)
            if (e.job.bug_id == job.bug_id && e.job.effective == job.effective)
                throw Error("duplicate dataset entry for (" + job.bug_id + ", " +
                            job.effective.to_string() + ")");
        entries.push_back({std::move(job), n, successes, double(successes) / double(n)});
    }

    std::vector<std::string> bug_ids() const {
        std::vector<std::string> ids;
        for (const auto& e : entries)
            if (std::find(ids.begin(), ids.end(), e.job.bug_id) == ids.end())
                ids.push_back(e.job.bug_id);
        return ids;
    }
};

inline Dataset dataset_from_response_sets(const std::vector<ResponseSet>& sets) {
    Dataset d;
    for (const auto& rs : sets)
        d.add(rs.job, static_cast<int>(rs.responses.size()), rs.successes());
    return d;
}

// ---------------------------------------------------------------------------
// Persistence

struct CorpusLoadError {
    std::string bug_dir;
    std::string message;
};

struct Corpus {
    std::vector<BugRecord> bugs;
    std::vector<CorpusLoadError> errors;

    const BugRecord& find(std::string_view bug_id) const {
        for (const auto& b : bugs)
            if (b.bug_id == bug_id) return b;
        throw Error("unknown bug: " + std::string(bug_id));
    }
};

namespace detail {

inline BugRecord load_bug(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw Error("missing manifest.json");
    nlohmann::json m = nlohmann::json::parse(read_file(manifest_path));

    BugRecord bug;
    bug.bug_id = m.at("bug_id").get<std::string>();
    bug.repository = m.at("repository").get<std::string>();
    if (bug.repository.empty()) throw Error("repository must be non-empty");
    bug.source_file_path = m.at("source_file").get<std::string>();
    bug.source_text = read_file(dir / bug.source_file_path);
    auto span = m.at("function_span");
    bug.span_begin = span.at(0).get<int>();
    bug.span_end = span.at(1).get<int>();
    int line_count = static_cast<int>(split_lines(bug.source_text).size());
    if (bug.span_begin < 1 || bug.span_end < bug.span_begin || bug.span_end > line_count)
        throw Error("function_span [" + std::to_string(bug.span_begin) + ", " +
                    std::to_string(bug.span_end) + "] outside source (" +
                    std::to_string(line_count) + " lines)");
    for (const auto& t : m.value("failing_tests", nlohmann::json::array())) {
        FailingTest ft;
        ft.test_file_path = t.at("file").get<std::string>();
        ft.test_code = t.contains("code") ? t.at("code").get<std::string>()
                                          : read_file(dir / ft.test_file_path);
        bug.failing_tests.push_back(std::move(ft));
    }
    if (m.contains("error_file")) {
        fs::path p = dir / m.at("error_file").get<std::string>();
        if (nonempty_file(p)) bug.error_text = read_file(p);
    } else {
        bug.error_text = m.value("error_text", "");
    }
    if (m.contains("runtime_trace")) bug.runtime_trace_path = dir / m.at("runtime_trace").get<std::string>();
    if (m.contains("angelic_trace")) bug.angelic_trace_path = dir / m.at("angelic_trace").get<std::string>();
    if (m.contains("issue")) {
        bug.issue = IssueText{m.at("issue").value("title", ""), m.at("issue").value("body", "")};
    } else if (m.contains("issue_file")) {
        fs::path p = dir / m.at("issue_file").get<std::string>();
        if (nonempty_file(p)) {
            nlohmann::json is = nlohmann::json::parse(read_file(p));
            bug.issue = IssueText{is.value("title", ""), is.value("body", "")};
        }
    }
    for (const auto& imp : m.value("imports", nlohmann::json::array()))
        bug.imports.push_back(imp.get<std::string>());
    bug.test_command = m.value("test_command", "");
    bug.bug_dir = dir;
    return bug;
}

} // namespace detail

/// Load every bug directory under root_dir. Malformed bugs are collected as
/// per-bug errors; the load continues. An empty corpus is an error.
inline Corpus load_corpus(const std::filesystem::path& root_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root_dir)) throw Error("corpus root is not a directory: " + root_dir.string());
    Corpus corpus;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root_dir))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    std::set<std::string> seen_ids;
    for (const auto& dir : dirs) {
        try {
            BugRecord bug = detail::load_bug(dir);
            if (!seen_ids.insert(bug.bug_id).second)
                throw Error("duplicate bug_id: " + bug.bug_id);
            corpus.bugs.push_back(std::move(bug));
        } catch (const std::exception& e) {
            corpus.errors.push_back({dir.string(), e.what()});
        }
    }
    if (corpus.bugs.empty() && corpus.errors.empty())
        throw Error("empty corpus: " + root_dir.string());
    if (corpus.bugs.empty())
        throw Error("no loadable bugs in corpus: " + root_dir.string());
    std::sort(corpus.bugs.begin(), corpus.bugs.end(),
              [](const BugRecord& a, const BugRecord& b) { return a.bug_id < b.bug_id; });
    return corpus;
}

inline nlohmann::json response_set_to_json(const ResponseSet& rs) {
    nlohmann::json j;
    j["bug_id"] = rs.job.bug_id;
    j["requested"] = rs.job.requested.to_string();
    j["effective"] = rs.job.effective.to_string();
    j["model_id"] = rs.model_id;
    j["temperature"] = rs.params.temperature;
    if (rs.params.seed) j["seed"] = *rs.params.seed;
    j["n"] = rs.params.n;
    j["order_index"] = rs.order_index;
    j["responses"] = nlohmann::json::array();
    for (const auto& r : rs.responses) {
        nlohmann::json rj;
        rj["raw_text"] = r.raw_text;
        if (r.patch) rj["patch"] = *r.patch;
        rj["verdict"] = std::string(verdict_name(r.verdict));
        j["responses"].push_back(std::move(rj));
    }
    return j;
}

inline ResponseSet response_set_from_json(const nlohmann::json& j) {
    ResponseSet rs;
    rs.job.bug_id = j.at("bug_id").get<std::string>();
    rs.job.requested = FactSet::parse(j.at("requested").get<std::string>());
    rs.job.effective = FactSet::parse(j.at("effective").get<std::string>());
    rs.model_id = j.value("model_id", "");
    rs.params.temperature = j.value("temperature", 1.0);
    if (j.contains("seed")) rs.params.seed = j.at("seed").get<long>();
    rs.params.n = j.value("n", 0);
    rs.order_index = j.value("order_index", 0);
    for (const auto& rj : j.at("responses")) {
        LlmResponse r;
        r.raw_text = rj.value("raw_text", "");
        if (rj.contains("patch")) r.patch = rj.at("patch").get<std::string>();
        r.verdict = verdict_from_name(rj.at("verdict").get<std::string>());
        rs.responses.push_back(std::move(r));
    }
    if (rs.params.n != static_cast<int>(rs.responses.size()))
        throw Error("response set for " + rs.job.bug_id + " has " +
                    std::to_string(rs.responses.size()) + " responses, expected n=" +
                    std::to_string(rs.params.n));
    for (const auto& r : rs.responses)
        if (r.verdict == Verdict::Plausible && !r.patch)
            throw Error("plausible verdict without patch in " + rs.job.bug_id);
    return rs;
}

inline nlohmann::json dataset_to_json(const Dataset& d) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : d.entries) {
        j.push_back({{"bug_id", e.job.bug_id},
                     {"requested", e.job.requested.to_string()},
                     {"bitvector", e.job.effective.to_string()},
                     {"n", e.n},
                     {"successes", e.successes},
                     {"pass_at_1", e.pass_at_1}});
    }
    return j;
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
    Dataset d;
    for (const auto& e : j) {
        Job job;
        job.bug_id = e.at("bug_id").get<std::string>();
        job.effective = FactSet::parse(e.at("bitvector").get<std::string>());
        job.requested = e.contains("requested")
                            ? FactSet::parse(e.at("requested").get<std::string>())
                            : job.effective;
        d.add(std::move(job), e.at("n").get<int>(), e.at("successes").get<int>());
    }
    return d;
}

inline std::string dataset_to_csv(const Dataset& d) {
    std::ostringstream out;
    out << "bug_id,bitvector,n,successes,pass_at_1\n";
    for (const auto& e : d.entries) {
        out << e.job.bug_id << ',' << e.job.effective.to_string() << ',' << e.n << ','
            << e.successes << ',' << (double(e.successes) / double(e.n)) << '\n';
    }
    return out.str();
}

inline Dataset dataset_from_csv(std::istream& in) {
    Dataset d;
    std::string line;
    if (!std::getline(in, line)) throw Error("empty dataset CSV");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string bug_id, bits, n_s, succ_s, p_s;
        if (!std::getline(ls, bug_id, ',') || !std::getline(ls, bits, ',') ||
            !std::getline(ls, n_s, ',') || !std::getline(ls, succ_s, ','))
            throw Error("malformed dataset CSV row: " + line);
        std::getline(ls, p_s, ',');
        Job job;
        job.bug_id = bug_id;
        job.requested = job.effective = FactSet::parse(bits);
        d.add(std::move(job), std::stoi(n_s), std::stoi(succ_s));
    }
    return d;
}

} // namespace factsel
