#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "factsel/corpus.hpp"
#include "factsel/fact_extract.hpp"
#include "factsel/prompt_engine.hpp"
#include "factsel/tokenizer.hpp"

using namespace factsel;

namespace {
const std::filesystem::path kFixtures = FACTSEL_FIXTURE_DIR;
const std::filesystem::path kGolden = FACTSEL_GOLDEN_DIR;

RenderedPrompt render_bits(const char* bits) {
    static Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    static ExtractedFacts facts = extract_all_facts(bug);
    PromptPlan plan{make_job(bug, FactSet::parse(bits))};
    return render(plan, facts);
}
} // namespace

TEST_CASE("rendered prompts byte-match the reviewed goldens") {
    for (const char* bits : {"0000000", "1111111", "0010100"}) {
        std::string expected = detail::read_file(kGolden / ("golden_" + std::string(bits) + ".txt"));
        CHECK_MESSAGE(render_bits(bits).text == expected, "golden mismatch for ", bits);
    }
}

TEST_CASE("every selected fact contributes exactly one section header") {
    const std::vector<std::pair<FactKind, std::string>> headers = {
        {FactKind::FailingTest, "# A test function that the buggy function fails:"},
        {FactKind::ErrorInfo, "# The error message from the failing test"},
        {FactKind::RuntimeInfo, "# Runtime values and types of variables inside the buggy function"},
        {FactKind::AngelicForest,
         "# Expected values and types of variables during the failing test execution"},
        {FactKind::GitHubIssue, "# A GitHub issue for this bug"},
    };
    auto count = [](const std::string& text, const std::string& needle) {
        int c = 0;
        for (std::size_t at = text.find(needle); at != std::string::npos;
             at = text.find(needle, at + 1))
            ++c;
        return c;
    };
    for (int v = 0; v < 128; v += 3) {
        FactSet s{std::uint8_t(v)};
        std::string text = render_bits(s.to_string().c_str()).text;
        for (const auto& [fact, header] : headers)
            CHECK(count(text, header) == (s.contains(fact) ? 1 : 0));
        CHECK(count(text, "# The source code of the buggy function") == 1);
    }
}

TEST_CASE("adding facts never shortens the prompt") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        std::uint8_t base = std::uint8_t(rng() % 128);
        std::uint8_t extra = std::uint8_t(rng() % 7);
        FactSet small{base};
        FactSet large = small.with(all_facts()[extra]);
        auto a = render_bits(small.to_string().c_str());
        auto b = render_bits(large.to_string().c_str());
        CHECK(a.char_length <= b.char_length);
        CHECK(a.text.size() <= b.text.size());
    }
}

TEST_CASE("full chain from empty to all facts is monotone in length") {
    FactSet s;
    std::size_t prev = render_bits(s.to_string().c_str()).char_length;
    for (FactKind f : all_facts()) {
        s = s.with(f);
        std::size_t now = render_bits(s.to_string().c_str()).char_length;
        CHECK(prev <= now);
        prev = now;
    }
}

TEST_CASE("enumerate_orderings yields 120 distinct permutations, canonical first") {
    auto orders = enumerate_orderings();
    CHECK(orders.size() == 120);
    CHECK(orders[0] == canonical_order());
    std::set<FactOrder> unique(orders.begin(), orders.end());
    CHECK(unique.size() == 120);
    for (const auto& o : orders) {
        std::set<FactKind> facts(o.begin(), o.end());
        CHECK(facts.size() == 5);
    }
}

TEST_CASE("error info renders immediately after the failing test in all orderings") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    ExtractedFacts facts = extract_all_facts(bug);
    Job job = make_job(bug, FactSet::all());
    std::set<std::string> distinct_texts;
    for (const auto& order : enumerate_orderings()) {
        PromptPlan plan{job, order};
        std::string text = render(plan, facts).text;
        std::size_t ft = text.find("# A test function that the buggy function fails:");
        std::size_t ei = text.find("# The error message from the failing test");
        REQUIRE(ft != std::string::npos);
        REQUIRE(ei != std::string::npos);
        // Nothing but the test section sits between the two headers.
        std::size_t next_header = text.find("\n# ", ft + 1);
        while (next_header != std::string::npos &&
               text.compare(next_header, 4, "\n# A") != 0 &&
               text.compare(next_header, 6, "\n# The") != 0 &&
               text.compare(next_header, 4, "\n# R") != 0 &&
               text.compare(next_header, 4, "\n# E") != 0)
            next_header = text.find("\n# ", next_header + 1);
        CHECK(ei > ft);
        CHECK(text.substr(ft, ei - ft).find("# Runtime values") == std::string::npos);
        CHECK(text.substr(ft, ei - ft).find("# Expected values") == std::string::npos);
        CHECK(text.substr(ft, ei - ft).find("# A GitHub issue") == std::string::npos);
        distinct_texts.insert(std::move(text));
    }
    // 120 permutations of 5 facts with a pinned (test, error) pair leave
    // 4 movable blocks: 24 distinct renderings, each seen 5 times.
    CHECK(distinct_texts.size() == 24);
}

TEST_CASE("selecting a fact with no extracted content is an error") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    ExtractedFacts facts = extract_all_facts(bug);
    facts.issue.reset();
    Job job;
    job.bug_id = bug.bug_id;
    job.requested = job.effective = FactSet::of({FactKind::GitHubIssue});
    PromptPlan plan{job};
    CHECK_THROWS_WITH_AS(render(plan, facts),
                         doctest::Contains("github_issue"), Error);
}

TEST_CASE("cot and import preamble toggles") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    ExtractedFacts facts = extract_all_facts(bug);
    Job job = make_job(bug, FactSet::parse("0000000"));
    PromptPlan plan{job};
    plan.include_cot = false;
    std::string no_cot = render(plan, facts).text;
    CHECK(no_cot.find("Following these steps:") == std::string::npos);
    CHECK(no_cot.find("Please fix the buggy function") != std::string::npos);
    plan.include_cot = true;
    plan.include_import_preamble = false;
    std::string no_imports = render(plan, facts).text;
    CHECK(no_imports.find("Assume that the following list of imports") == std::string::npos);
}

TEST_CASE("prompt hash identifies the text") {
    auto a = render_bits("0000000");
    auto b = render_bits("0000001");
    CHECK(a.prompt_hash != b.prompt_hash);
    CHECK(a.prompt_hash == render_bits("0000000").prompt_hash);
    CHECK(a.prompt_hash.size() == 64);
}

TEST_CASE("char length counts Unicode scalars, not bytes") {
    CHECK(detail::unicode_scalar_count("abc") == 3);
    CHECK(detail::unicode_scalar_count("caf\xc3\xa9") == 4);        // 5 bytes
    CHECK(detail::unicode_scalar_count("\xe2\x82\xac 1") == 3);     // euro sign
}

TEST_CASE("tokenizer compresses repetitive text") {
    std::string repetitive(400, 'a');
    std::string mixed = "The quick brown fox jumps over the lazy dog 0123456789";
    std::size_t rep = token_count(repetitive, "default");
    CHECK(rep < repetitive.size() / 4);
    CHECK(token_count(mixed, "default") <= mixed.size());
    CHECK(token_count("", "default") == 0);
}

TEST_CASE("unknown tokenizer id errors and lists the available ids") {
    CHECK_THROWS_WITH_AS(token_count("abc", "nope"), doctest::Contains("default"), Error);
}
