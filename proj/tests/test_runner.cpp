#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "factsel/corpus.hpp"
#include "factsel/llm_gateway.hpp"
#include "factsel/prompt_engine.hpp"
#include "factsel/repair_runner.hpp"

using namespace factsel;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = FACTSEL_FIXTURE_DIR;

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) {
        path = fs::temp_directory_path() / tag;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

fs::path make_sandbox(const BugRecord& bug, const fs::path& root) {
    fs::path sb = root / "sb";
    fs::remove_all(sb);
    fs::copy(bug.bug_dir, sb, fs::copy_options::recursive);
    return sb;
}

const char* kGoodPatch =
    "def rescale(self, values, factor):\n"
    "    base = self.ceiling(values)\n"
    "    result = []\n"
    "    for v in values:\n"
    "        if factor > 0 and v >= 0:\n"
    "            result.append(clamp(v * factor, 0, base * factor))\n"
    "        else:\n"
    "            result.append(v)\n"
    "    return result\n";

} // namespace

TEST_CASE("extract_patch takes the last fenced block defining the function") {
    std::string response =
        "First, here is the buggy version:\n"
        "```python\ndef rescale(self):\n    return 0\n```\n"
        "After analysis, the fix is:\n"
        "```python\ndef rescale(self, values, factor):\n    return values\n```\n";
    auto patch = extract_patch(response, "rescale");
    REQUIRE(patch.has_value());
    CHECK(patch->find("return values") != std::string::npos);

    CHECK(!extract_patch("no code here", "rescale").has_value());
    CHECK(!extract_patch("```python\ndef other():\n    pass\n```", "rescale").has_value());
    // A name sharing a prefix does not match.
    CHECK(!extract_patch("```python\ndef rescale_all():\n    pass\n```", "rescale").has_value());
}

TEST_CASE("splicing the original function back is the identity") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    for (const char* id : {"demo:1", "demo:2", "demo:3"}) {
        const BugRecord& bug = corpus.find(id);
        ExtractedFacts facts = extract_static_facts(bug);
        CHECK(splice(bug, facts.buggy_function_code) == bug.source_text);
    }
}

TEST_CASE("splice re-indents the patch to the original function's indent") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    std::string patched = splice(bug, kGoodPatch);
    CHECK(patched.find("    def rescale(self, values, factor):\n") != std::string::npos);
    CHECK(patched.find("clamp(v * factor, 0, base * factor)") != std::string::npos);
    // Everything outside the span is untouched.
    CHECK(patched.find("def clamp(value, lo, hi):") != std::string::npos);
    CHECK(patched.find("def ceiling(self, values):") != std::string::npos);
    auto lines = detail::split_lines(patched);
    auto orig = detail::split_lines(bug.source_text);
    for (int i = 0; i < bug.span_begin - 1; ++i) CHECK(lines[i] == orig[i]);
}

TEST_CASE("splice rejects malformed patches") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    CHECK_THROWS_AS(splice(bug, "not python at all ("), Error);
    CHECK_THROWS_AS(splice(bug, "x = 1\n"), Error);
    CHECK_THROWS_AS(splice(bug, "def wrong_name():\n    pass\n"), Error);
    CHECK_THROWS_AS(
        splice(bug, "def rescale():\n    pass\n\ndef rescale():\n    pass\n"), Error);
}

TEST_CASE("validate classifies pass, fail, and timeout") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    BugRecord bug = corpus.find("demo:1");
    TempDir tmp("factsel_validate");
    fs::path sandbox = make_sandbox(bug, tmp.path);
    std::string good = splice(bug, kGoodPatch);

    bug.test_command = "true";
    CHECK(validate(bug, good, sandbox, std::chrono::milliseconds(5000)) == Verdict::Plausible);
    bug.test_command = "false";
    CHECK(validate(bug, good, sandbox, std::chrono::milliseconds(5000)) == Verdict::TestFail);
    bug.test_command = "sleep 30";
    CHECK(validate(bug, good, sandbox, std::chrono::milliseconds(200)) == Verdict::Timeout);
    bug.test_command = "exec /no/such/binary";
    CHECK(validate(bug, good, sandbox, std::chrono::milliseconds(5000)) == Verdict::BuildError);
}

TEST_CASE("validate runs the real test command against the patched file") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    TempDir tmp("factsel_validate_grep");
    fs::path sandbox = make_sandbox(bug, tmp.path);

    std::string good = splice(bug, kGoodPatch);
    ExtractedFacts facts = extract_static_facts(bug);
    std::string still_buggy = splice(bug, facts.buggy_function_code);
    CHECK(validate(bug, good, sandbox, std::chrono::milliseconds(5000)) == Verdict::Plausible);
    CHECK(validate(bug, still_buggy, sandbox, std::chrono::milliseconds(5000)) ==
          Verdict::TestFail);
    // The sandbox working copy is restored between validations.
    CHECK(detail::read_file(sandbox / bug.source_file_path) == bug.source_text);
}

TEST_CASE("validate never touches the corpus copy") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    std::string before = detail::read_file(bug.bug_dir / bug.source_file_path);
    TempDir tmp("factsel_validate_ro");
    fs::path sandbox = make_sandbox(bug, tmp.path);
    validate(bug, splice(bug, kGoodPatch), sandbox, std::chrono::milliseconds(5000));
    CHECK(detail::read_file(bug.bug_dir / bug.source_file_path) == before);
}

TEST_CASE("run_jobs sweeps, persists, and resumes without new LLM calls") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    TempDir tmp("factsel_runjobs");

    std::vector<Job> jobs;
    for (const char* id : {"demo:1", "demo:2"})
        for (const char* bits : {"0000000", "0000001", "0010000", "1100000"})
            jobs.push_back(make_job(corpus.find(id), FactSet::parse(bits)));

    // Every response carries a patch for the right function per bug; the
    // demo:1 patch passes its grep check, the demo:2 patch does not.
    std::string demo2_patch =
        "```python\ndef parse(self, line):\n    return []\n```";
    std::map<std::string, std::vector<std::string>> script;
    MockBackend backend({}, "");
    QueryConfig cfg;
    cfg.n = 3;
    cfg.seed = 9;
    cfg.cache_dir = tmp.path / "cache";
    RunOptions opts;
    opts.results_dir = tmp.path / "results";
    opts.sandbox_root = tmp.path / "sandbox";
    opts.parallel_jobs = 2;

    // Script per prompt hash so each bug gets a parseable patch.
    for (const Job& job : dedupe_jobs(jobs)) {
        const BugRecord& bug = corpus.find(job.bug_id);
        ExtractedFacts facts = extract_all_facts(bug);
        PromptPlan plan{job, opts.fact_order, opts.include_cot, opts.include_import_preamble};
        auto prompt = render(plan, facts);
        backend.script(prompt.prompt_hash,
                       {job.bug_id == "demo:1" ? "```python\n" + std::string(kGoodPatch) + "```"
                                               : demo2_patch});
    }

    RunSummary summary = run_jobs(jobs, corpus, cfg, backend, opts);
    CHECK(summary.failures.empty());
    CHECK(summary.response_sets.size() == 8);
    int calls_after_first = backend.calls();
    CHECK(calls_after_first == 8 * 3);
    for (const auto& rs : summary.response_sets) {
        CHECK(rs.responses.size() == 3);
        if (rs.job.bug_id == "demo:1") CHECK(rs.successes() == 3);
        else CHECK(rs.successes() == 0);
    }

    // Re-run: resumed from persisted results, zero new calls.
    RunSummary again = run_jobs(jobs, corpus, cfg, backend, opts);
    CHECK(again.response_sets.size() == 8);
    CHECK(backend.calls() == calls_after_first);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(again.response_sets[i].job.bug_id == summary.response_sets[i].job.bug_id);
        CHECK(again.response_sets[i].successes() == summary.response_sets[i].successes());
    }
}

TEST_CASE("run_jobs records per-job failures and continues") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    TempDir tmp("factsel_runjobs_fail");
    std::vector<Job> jobs;
    jobs.push_back(make_job(corpus.find("demo:1"), FactSet::parse("0000000")));
    Job broken;
    broken.bug_id = "demo:404"; // unknown bug
    broken.requested = broken.effective = FactSet::parse("0000000");
    jobs.push_back(broken);

    MockBackend backend({}, "no patch here");
    QueryConfig cfg;
    cfg.n = 2;
    RunOptions opts;
    opts.results_dir = tmp.path / "results";
    opts.sandbox_root = tmp.path / "sandbox";
    RunSummary summary = run_jobs(jobs, corpus, cfg, backend, opts);
    CHECK(summary.response_sets.size() == 1);
    REQUIRE(summary.failures.size() == 1);
    CHECK(summary.failures[0].job.bug_id == "demo:404");
    // Unparseable responses become extraction failures, not job failures.
    CHECK(summary.response_sets[0].successes() == 0);
    for (const auto& r : summary.response_sets[0].responses)
        CHECK(r.verdict == Verdict::PatchExtractionFail);
}
