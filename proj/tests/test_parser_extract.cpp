#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "factsel/corpus.hpp"
#include "factsel/fact_extract.hpp"
#include "factsel/source_parser.hpp"

using namespace factsel;

namespace {
const std::filesystem::path kFixtures = FACTSEL_FIXTURE_DIR;
}

TEST_CASE("parser finds functions, classes, and imports") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    ModuleInfo mod = default_parser().parse(bug.source_text);

    REQUIRE(mod.classes.size() == 1);
    CHECK(mod.classes[0].name == "SeriesScaler");
    CHECK(mod.classes[0].declaration == "SeriesScaler");
    REQUIRE(mod.classes[0].docstring.has_value());
    CHECK(mod.classes[0].docstring->find("reference ceiling") != std::string::npos);

    REQUIRE(mod.functions.size() == 3);
    CHECK(mod.functions[0].name == "clamp");
    CHECK(!mod.functions[0].class_index.has_value());
    CHECK(mod.functions[1].name == "ceiling");
    CHECK(mod.functions[2].name == "rescale");
    CHECK(mod.functions[2].class_index == 0);
    CHECK(mod.functions[2].header_line == 24);
    CHECK(mod.functions[2].end_line == 32);
    CHECK(mod.functions[2].indent == 4);
    CHECK(mod.functions[2].signature == "rescale(self, values, factor)");

    CHECK(mod.functions[2].self_calls == std::vector<std::string>{"ceiling"});
    CHECK(mod.functions[2].plain_calls == std::vector<std::string>{"clamp"});

    REQUIRE(mod.imports.size() == 2);
    CHECK(mod.imports[0] == "import math");
    CHECK(mod.imports[1] == "from collections import OrderedDict");
}

TEST_CASE("keywords inside strings and comments are invisible") {
    std::string src =
        "def f(x):\n"
        "    label = \"if and or while\"  # if if if\n"
        "    return label\n";
    CHECK(default_parser().cyclomatic_complexity(src) == 1);
    ModuleInfo mod = default_parser().parse(src);
    REQUIRE(mod.functions.size() == 1);
    CHECK(mod.functions[0].plain_calls.empty());
}

TEST_CASE("cyclomatic complexity counts decision keywords") {
    CHECK(default_parser().cyclomatic_complexity("def f():\n    return 1\n") == 1);
    CHECK(default_parser().cyclomatic_complexity(
              "def f(x):\n"
              "    if x > 0:\n"
              "        return 1\n"
              "    elif x < 0:\n"
              "        return -1\n"
              "    for i in range(3):\n"
              "        x += i\n"
              "    return x\n") == 4);
    CHECK(default_parser().cyclomatic_complexity(
              "def f(a, b):\n    if a and b:\n        return 1\n    return 0\n") == 3);
    CHECK(default_parser().cyclomatic_complexity(
              "def f(xs):\n"
              "    try:\n"
              "        while xs:\n"
              "            xs.pop()\n"
              "    except IndexError:\n"
              "        pass\n") == 3);
    CHECK_THROWS_AS(default_parser().cyclomatic_complexity("x = 1\n"), Error);
}

TEST_CASE("static extraction resolves signatures by scope") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    ExtractedFacts facts = extract_static_facts(corpus.find("demo:1"));

    CHECK(facts.function_name == "rescale");
    CHECK(facts.buggy_function_code.starts_with("def rescale(self, values, factor):\n"));
    CHECK(facts.buggy_function_code.find("\n    base = self.ceiling") != std::string::npos);
    CHECK(facts.class_declaration == "SeriesScaler");
    CHECK(facts.cyclomatic_complexity == 4);

    REQUIRE(facts.used_method_signatures.size() == 2);
    const auto& in_class = facts.used_method_signatures[0];
    CHECK(in_class.scope == SignatureScope::InClass);
    CHECK(in_class.signature == "ceiling(self, values)");
    const auto& in_file = facts.used_method_signatures[1];
    CHECK(in_file.scope == SignatureScope::InFile);
    CHECK(in_file.signature == "clamp(value, lo, hi)");

    CHECK(facts.imports == std::vector<std::string>{"import math",
                                                    "from collections import OrderedDict"});
}

TEST_CASE("flat function has no class context") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    ExtractedFacts facts = extract_static_facts(corpus.find("demo:3"));
    CHECK(facts.function_name == "repeat_join");
    CHECK(!facts.class_declaration.has_value());
    CHECK(facts.used_method_signatures.empty());
    CHECK(facts.cyclomatic_complexity == 2);
}

TEST_CASE("span without a function is an error") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    BugRecord bug = corpus.find("demo:1");
    bug.span_begin = 14; // the class statement
    bug.span_end = 14;
    CHECK_THROWS_AS(extract_static_facts(bug), Error);
    bug.span_begin = 2; // blank line
    bug.span_end = 3;   // import
    CHECK_THROWS_AS(extract_static_facts(bug), Error);
}

TEST_CASE("trace ingestion keeps only changed, non-callable exit variables") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& bug = corpus.find("demo:1");
    auto cases = ingest_trace(*bug.runtime_trace_path, TraceMode::Runtime);
    REQUIRE(cases.size() == 2);
    CHECK(cases[0].case_id == 1);
    // "values" did not change, so it is absent at exit; base/result/v are new.
    REQUIRE(cases[0].exit.size() == 3);
    for (const auto& v : cases[0].exit) CHECK(v.name != "values");
    // entry keeps all non-callable parameters
    CHECK(cases[0].entry.size() == 3);
}

TEST_CASE("trace ingestion drops callable-valued variables") {
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() / "factsel_trace.json";
    {
        std::ofstream out(p);
        out << R"([{"case_id": 1,
                    "entry": [{"name": "cb", "value": "<function foo at 0x1>", "type": "function"},
                              {"name": "x", "value": "1", "type": "int"}],
                    "exit": [{"name": "x", "value": "2", "type": "int"}]}])";
    }
    auto cases = ingest_trace(p, TraceMode::Runtime);
    REQUIRE(cases.size() == 1);
    REQUIRE(cases[0].entry.size() == 1);
    CHECK(cases[0].entry[0].name == "x");
    REQUIRE(cases[0].exit.size() == 1);
    CHECK(cases[0].exit[0].value_repr == "2");
    fs::remove(p);
}

TEST_CASE("malformed traces are rejected with context") {
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() / "factsel_trace_bad.json";
    auto write = [&](const char* body) {
        std::ofstream out(p);
        out << body;
    };
    write(R"({"not": "an array"})");
    CHECK_THROWS_AS(ingest_trace(p, TraceMode::Runtime), Error);
    write(R"([{"entry": []}])");
    CHECK_THROWS_AS(ingest_trace(p, TraceMode::Runtime), Error);
    write(R"([{"case_id": 1, "entry": [{"name": "x", "value": "1"}]}])");
    CHECK_THROWS_AS(ingest_trace(p, TraceMode::Runtime), Error);
    write(R"([{"case_id": 1, "entry": [{"name": "x", "value": "1", "type": "int"},
                                       {"name": "x", "value": "2", "type": "int"}]}])");
    CHECK_THROWS_AS(ingest_trace(p, TraceMode::Runtime), Error);
    fs::remove(p);
}

TEST_CASE("refined availability mask drops facts extraction cannot provide") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    const BugRecord& b1 = corpus.find("demo:1");
    CHECK(availability_mask(b1, extract_all_facts(b1)) == FactSet::all());
    const BugRecord& b3 = corpus.find("demo:3");
    FactSet m = availability_mask(b3, extract_all_facts(b3));
    CHECK(!m.contains(FactKind::BuggyClass));
    CHECK(!m.contains(FactKind::UsedMethodSignatures));
    CHECK(m.contains(FactKind::FailingTest));
}

TEST_CASE("extracted facts serialize to JSON") {
    Corpus corpus = load_corpus(kFixtures / "corpus");
    nlohmann::json j = extracted_facts_to_json(extract_all_facts(corpus.find("demo:1")));
    CHECK(j["function_name"] == "rescale");
    CHECK(j["cyclomatic_complexity"] == 4);
    CHECK(j["runtime_cases"].size() == 2);
    CHECK(j["angelic_cases"].size() == 2);
    CHECK(j["used_method_signatures"].size() == 2);
    CHECK(j["issue"]["title"].get<std::string>().find("rescale") != std::string::npos);
}
