#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "factsel/core.hpp"
#include "factsel/corpus.hpp"
#include "factsel/source_parser.hpp"

namespace factsel {

enum class SignatureScope { InClass, InFile };

struct UsedSignature {
    SignatureScope scope;
    std::string signature; // e.g. "helper(self, x)"
};

struct VariableSnapshot {
    std::string name;
    std::string value_repr;
    std::string type_repr;
};

struct VariableSnapshotCase {
    int case_id = 0;
    std::vector<VariableSnapshot> entry;
    std::vector<VariableSnapshot> exit; // only variables whose value changed
};

enum class TraceMode { Runtime, Angelic };

struct ExtractedFacts {
    std::string buggy_function_code; // dedented, always present
    std::string function_name;
    std::optional<std::string> class_declaration; // header, no `class`/colon
    std::optional<std::string> class_docstring;
    std::vector<UsedSignature> used_method_signatures;
    std::vector<FailingTest> failing_tests;
    std::optional<std::string> error_info;
    std::vector<VariableSnapshotCase> runtime_cases;
    std::vector<VariableSnapshotCase> angelic_cases;
    std::optional<IssueText> issue;
    std::vector<std::string> imports;
    int cyclomatic_complexity = 1;
};

namespace detail {

inline std::string dedent(const std::vector<std::string>& lines, int first, int last,
                          int indent) {
    std::string out;
    for (int ln = first; ln <= last; ++ln) {
        std::string_view line = lines[ln - 1];
        int strip = 0, cols = 0;
        while (strip < static_cast<int>(line.size()) && cols < indent) {
            if (line[strip] == ' ') cols += 1;
            else if (line[strip] == '\t') cols += 8;
            else break;
            ++strip;
        }
        out += std::string(line.substr(strip));
        out += '\n';
    }
    return out;
}

// Class and function valued variables carry no useful state for the prompt.
inline bool is_callable_snapshot(const VariableSnapshot& v) {
    static const std::vector<std::string_view> kinds = {
        "function", "builtin_function_or_method", "method", "type", "module", "class"};
    for (auto k : kinds)
        if (v.type_repr == k) return true;
    return v.value_repr.starts_with("<function") || v.value_repr.starts_with("<class") ||
           v.value_repr.starts_with("<bound method") || v.value_repr.starts_with("<module");
}

} // namespace detail

/// Static facts for a bug: the buggy function's code, its enclosing class
/// declaration (with docstring), signatures of statically resolvable callees
/// split by scope, imports, and cyclomatic complexity.
inline ExtractedFacts extract_static_facts(const BugRecord& bug,
                                           const SourceParser& parser = default_parser()) {
    ExtractedFacts facts;
    ModuleInfo mod;
    try {
        mod = parser.parse(bug.source_text);
    } catch (const std::exception& e) {
        throw Error("cannot parse " + bug.source_file_path + ": " + e.what());
    }

    const FunctionNode* target = nullptr;
    for (const auto& fn : mod.functions) {
        if (fn.header_line >= bug.span_begin && fn.header_line <= bug.span_end &&
            (!target || fn.indent < target->indent ||
             (fn.indent == target->indent && fn.header_line < target->header_line)))
            target = &fn;
    }
    for (const auto& cls : mod.classes)
        if (cls.header_line == bug.span_begin)
            throw Error("span is not a function: line " + std::to_string(bug.span_begin) +
                        " declares class " + cls.name);
    if (!target)
        throw Error("span is not a function: no function declared in lines " +
                    std::to_string(bug.span_begin) + ".." + std::to_string(bug.span_end));

    auto lines = detail::split_lines(bug.source_text);
    facts.buggy_function_code =
        detail::dedent(lines, bug.span_begin, bug.span_end, target->indent);
    facts.function_name = target->name;

    const ClassNode* cls = nullptr;
    if (target->class_index) {
        cls = &mod.classes[*target->class_index];
        facts.class_declaration = cls->declaration;
        facts.class_docstring = cls->docstring;
    }

    // Callee signatures: self.<m>(...) resolves against sibling methods,
    // bare <f>(...) against module-level functions in the same file.
    for (const auto& callee : target->self_calls) {
        if (!cls) continue;
        for (const auto& fn : mod.functions)
            if (fn.class_index && &mod.classes[*fn.class_index] == cls && fn.name == callee &&
                &fn != target)
                facts.used_method_signatures.push_back({SignatureScope::InClass, fn.signature});
    }
    for (const auto& callee : target->plain_calls) {
        for (const auto& fn : mod.functions)
            if (!fn.class_index && fn.indent == 0 && fn.name == callee && &fn != target)
                facts.used_method_signatures.push_back({SignatureScope::InFile, fn.signature});
    }

    facts.failing_tests = bug.failing_tests;
    if (!bug.error_text.empty()) facts.error_info = bug.error_text;
    facts.issue = bug.issue;
    facts.imports = bug.imports.empty() ? mod.imports : bug.imports;
    facts.cyclomatic_complexity = parser.cyclomatic_complexity(facts.buggy_function_code);
    return facts;
}

/// Reads a trace file: a JSON array of cases, each
/// {case_id, entry: [{name, value, type}], exit: [...]}. Exit lists are
/// filtered to variables whose value changed; callable-valued variables are
/// dropped entirely. Runtime and angelic traces share the schema.
inline std::vector<VariableSnapshotCase> ingest_trace(const std::filesystem::path& path,
                                                      TraceMode mode) {
    (void)mode; // identical shape; semantics differ downstream
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("trace " + path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw Error("trace " + path.string() + ": top level must be an array");

    auto read_vars = [&](const nlohmann::json& arr, int case_id,
                         const char* field) -> std::vector<VariableSnapshot> {
        std::vector<VariableSnapshot> out;
        for (const auto& v : arr) {
            if (!v.contains("name") || !v.contains("value") || !v.contains("type"))
                throw Error("trace " + path.string() + ": case " + std::to_string(case_id) +
                            " field '" + field + "' needs {name, value, type}");
            VariableSnapshot snap{v.at("name").get<std::string>(),
                                  v.at("value").get<std::string>(),
                                  v.at("type").get<std::string>()};
            for (const auto& prev : out)
                if (prev.name == snap.name)
                    throw Error("trace " + path.string() + ": duplicate variable '" +
                                snap.name + "' in case " + std::to_string(case_id));
            out.push_back(std::move(snap));
        }
        return out;
    };

    std::vector<VariableSnapshotCase> cases;
    for (const auto& c : doc) {
        if (!c.contains("case_id"))
            throw Error("trace " + path.string() + ": case missing case_id");
        VariableSnapshotCase vc;
        vc.case_id = c.at("case_id").get<int>();
        auto entry = read_vars(c.value("entry", nlohmann::json::array()), vc.case_id, "entry");
        auto exit = read_vars(c.value("exit", nlohmann::json::array()), vc.case_id, "exit");
        for (auto& v : entry)
            if (!detail::is_callable_snapshot(v)) vc.entry.push_back(std::move(v));
        for (auto& v : exit) {
            if (detail::is_callable_snapshot(v)) continue;
            auto at_entry = std::find_if(vc.entry.begin(), vc.entry.end(),
                                         [&](const auto& e) { return e.name == v.name; });
            bool changed = at_entry == vc.entry.end() || at_entry->value_repr != v.value_repr;
            if (changed) vc.exit.push_back(std::move(v));
        }
        cases.push_back(std::move(vc));
    }
    return cases;
}

/// Everything the prompt engine needs for one bug, dynamic facts included.
inline ExtractedFacts extract_all_facts(const BugRecord& bug,
                                        const SourceParser& parser = default_parser()) {
    ExtractedFacts facts = extract_static_facts(bug, parser);
    if (bug.runtime_trace_path && detail::nonempty_file(*bug.runtime_trace_path))
        facts.runtime_cases = ingest_trace(*bug.runtime_trace_path, TraceMode::Runtime);
    if (bug.angelic_trace_path && detail::nonempty_file(*bug.angelic_trace_path))
        facts.angelic_cases = ingest_trace(*bug.angelic_trace_path, TraceMode::Angelic);
    return facts;
}

/// Refines the heuristic corpus-level mask with what extraction actually found.
inline FactSet availability_mask(const BugRecord& bug, const ExtractedFacts& facts) {
    FactSet m = availability_mask(bug);
    if (!facts.class_declaration) m = m.without(FactKind::BuggyClass);
    if (facts.used_method_signatures.empty()) m = m.without(FactKind::UsedMethodSignatures);
    if (facts.runtime_cases.empty()) m = m.without(FactKind::RuntimeInfo);
    if (facts.angelic_cases.empty()) m = m.without(FactKind::AngelicForest);
    return m;
}

inline nlohmann::json extracted_facts_to_json(const ExtractedFacts& f) {
    nlohmann::json j;
    j["function_name"] = f.function_name;
    j["buggy_function_code"] = f.buggy_function_code;
    if (f.class_declaration) j["class_declaration"] = *f.class_declaration;
    if (f.class_docstring) j["class_docstring"] = *f.class_docstring;
    j["used_method_signatures"] = nlohmann::json::array();
    for (const auto& s : f.used_method_signatures)
        j["used_method_signatures"].push_back(
            {{"scope", s.scope == SignatureScope::InClass ? "in_class" : "in_file"},
             {"signature", s.signature}});
    j["failing_tests"] = nlohmann::json::array();
    for (const auto& t : f.failing_tests)
        j["failing_tests"].push_back({{"file", t.test_file_path}, {"code", t.test_code}});
    if (f.error_info) j["error_info"] = *f.error_info;
    auto cases_json = [](const std::vector<VariableSnapshotCase>& cases) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : cases) {
            nlohmann::json cj;
            cj["case_id"] = c.case_id;
            for (const char* side : {"entry", "exit"}) {
                cj[side] = nlohmann::json::array();
                for (const auto& v : (std::string_view(side) == "entry" ? c.entry : c.exit))
                    cj[side].push_back(
                        {{"name", v.name}, {"value", v.value_repr}, {"type", v.type_repr}});
            }
            arr.push_back(std::move(cj));
        }
        return arr;
    };
    j["runtime_cases"] = cases_json(f.runtime_cases);
    j["angelic_cases"] = cases_json(f.angelic_cases);
    if (f.issue) j["issue"] = {{"title", f.issue->title}, {"body", f.issue->body}};
    j["imports"] = f.imports;
    j["cyclomatic_complexity"] = f.cyclomatic_complexity;
    return j;
}

} // namespace factsel
