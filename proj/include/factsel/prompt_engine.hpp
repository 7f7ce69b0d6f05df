#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "factsel/core.hpp"
#include "factsel/fact_extract.hpp"
#include "factsel/sha256.hpp"
#include "factsel/tokenizer.hpp"

namespace factsel {

/// The five facts whose section order is free. Buggy class and used method
/// signatures always render inside the function section, so they are not
/// orderable; error info follows its failing test when both are present.
inline constexpr std::array<FactKind, 5> orderable_facts() {
    return {FactKind::FailingTest, FactKind::ErrorInfo, FactKind::RuntimeInfo,
            FactKind::AngelicForest, FactKind::GitHubIssue};
}

using FactOrder = std::array<FactKind, 5>;

inline constexpr FactOrder canonical_order() { return orderable_facts(); }

/// All 120 permutations of the orderable facts, canonical order first.
inline std::vector<FactOrder> enumerate_orderings() {
    FactOrder order = canonical_order();
    std::vector<FactOrder> out;
    do {
        out.push_back(order);
    } while (std::next_permutation(order.begin(), order.end()));
    return out;
}

struct PromptPlan {
    Job job;
    FactOrder fact_order = canonical_order();
    bool include_cot = true;
    bool include_import_preamble = true;
};

struct RenderedPrompt {
    std::string text;
    std::size_t char_length = 0; // Unicode scalars, not bytes
    std::size_t token_length = 0;
    std::string prompt_hash;
};

namespace detail {

inline std::size_t unicode_scalar_count(std::string_view text) {
    std::size_t n = 0;
    for (unsigned char c : text)
        if ((c & 0xc0) != 0x80) ++n; // skip UTF-8 continuation bytes
    return n;
}

inline std::string indent_block(std::string_view block, int spaces) {
    std::string pad(spaces, ' ');
    std::string out;
    std::size_t start = 0;
    while (start < block.size()) {
        std::size_t nl = block.find('\n', start);
        std::string_view line =
            block.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (!line.empty()) out += pad;
        out += std::string(line);
        out += '\n';
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline void append_snapshot_lines(std::string& out, const std::vector<VariableSnapshot>& vars,
                                  const char* value_label) {
    for (const auto& v : vars)
        out += v.name + ", " + value_label + ": " + v.value_repr + ", type: " + v.type_repr + "\n";
}

} // namespace detail

/// The five-step chain-of-thought block, with the fact list and correctness
/// criteria expanded to mention exactly the selected facts.
inline std::string cot_instructions(FactSet effective) {
    const bool bc = effective.contains(FactKind::BuggyClass);
    const bool ums = effective.contains(FactKind::UsedMethodSignatures);
    const bool ft = effective.contains(FactKind::FailingTest);
    const bool ei = effective.contains(FactKind::ErrorInfo);
    const bool rt = effective.contains(FactKind::RuntimeInfo);
    const bool af = effective.contains(FactKind::AngelicForest);
    const bool gi = effective.contains(FactKind::GitHubIssue);

    std::vector<std::string> listed{"the buggy function"};
    if (bc) listed.push_back("buggy class");
    if (ums) listed.push_back("buggy file");
    if (gi) listed.push_back("the github issue");
    if (rt && af) listed.push_back("the expected and actual input/output variable information");
    else if (rt) listed.push_back("the actual input/output variable information");
    else if (af) listed.push_back("the expected input/output variable information");

    std::string fact_list = detail::join(listed, ", ");
    if (ei) fact_list = "the error message along with " + fact_list;

    std::string out;
    out += "1. Analyze ";
    if (ft) out += "the failing test case and its relationship with ";
    out += fact_list + ".\n";
    out += "2. Identify the potential error location within the problematic function.\n";
    out += "3. Explain the bug's cause using:\n";

    std::vector<std::string> causes{"The buggy function"};
    if (bc) causes.push_back("The buggy class");
    if (ums) causes.push_back("The buggy file");
    if (ft && ei) causes.push_back("The failing test and error message");
    else if (ft) causes.push_back("The failing test");
    else if (ei) causes.push_back("The error message");
    if (rt && af)
        causes.push_back("Discrepancies between expected and actual input/output variable values");
    else if (rt) causes.push_back("The runtime input/output variable values");
    else if (af) causes.push_back("The expected input/output variable values");
    if (gi) causes.push_back("The Github Issue information");
    for (std::size_t i = 0; i < causes.size(); ++i)
        out += std::string("    ") + char('a' + i) + ". " + causes[i] + "\n";

    out += "4. Suggest possible approaches for fixing the bug.\n";
    out += "5. Present the corrected code for the problematic function such that it satisfies "
           "the following:\n";
    std::vector<std::string> criteria;
    criteria.push_back(ft || ei ? "Passes the failing test." : "Fixes the bug.");
    if (af) criteria.push_back("Satisfies the expected input/output variable values provided.");
    if (gi) criteria.push_back("Successfully resolves the issue posted in Github.");
    for (std::size_t i = 0; i < criteria.size(); ++i)
        out += std::string("    ") + char('a' + i) + ". " + criteria[i] + "\n";
    return out;
}

namespace detail {

inline void require_content(bool ok, FactKind f) {
    if (!ok)
        throw Error(std::string("fact selected but no extracted content: ") +
                    std::string(fact_name(f)) + " (" + std::string(fact_code(f)) + ")");
}

inline std::string function_section(FactSet effective, const ExtractedFacts& facts) {
    const bool bc = effective.contains(FactKind::BuggyClass);
    const bool ums = effective.contains(FactKind::UsedMethodSignatures);
    std::string out = "# The source code of the buggy function\n```python\n";
    bool in_class = bc && facts.class_declaration.has_value();
    if (in_class) {
        out += "# The declaration of the class containing the buggy function\n";
        out += "class " + *facts.class_declaration + ":\n";
        if (facts.class_docstring) out += indent_block(*facts.class_docstring, 4);
        out += "    ...\n\n";
        if (ums) {
            for (const auto& sig : facts.used_method_signatures) {
                if (sig.scope != SignatureScope::InClass) continue;
                out += "    # This function from the same class is called by the buggy "
                       "function\n";
                out += "    def " + sig.signature + ":\n";
                out += "        # Please ignore the body of this function\n\n";
            }
        }
        out += "    # this is the buggy function you need to fix\n";
        out += indent_block(facts.buggy_function_code, 4);
    } else {
        if (ums) {
            for (const auto& sig : facts.used_method_signatures) {
                if (sig.scope != SignatureScope::InClass) continue;
                out += "# This function from the same class is called by the buggy function\n";
                out += "def " + sig.signature + ":\n";
                out += "    # Please ignore the body of this function\n\n";
            }
        }
        out += "# this is the buggy function you need to fix\n";
        out += facts.buggy_function_code;
    }
    if (ums) {
        for (const auto& sig : facts.used_method_signatures) {
            if (sig.scope != SignatureScope::InFile) continue;
            out += "\n# This function from the same file, but not the same class, is called by "
                   "the buggy function\n";
            out += "def " + sig.signature + ":\n";
            out += "    # Please ignore the body of this function\n";
        }
    }
    out += "```\n";
    return out;
}

inline std::string failing_test_section(const ExtractedFacts& facts) {
    std::string out = "# A test function that the buggy function fails:\n```python\n";
    for (std::size_t i = 0; i < facts.failing_tests.size(); ++i) {
        const auto& t = facts.failing_tests[i];
        if (i) out += "\n";
        out += "# The relative path of the failing test file: " + t.test_file_path + "\n\n";
        out += t.test_code;
        if (out.back() != '\n') out += '\n';
    }
    out += "```\n";
    return out;
}

inline std::string error_info_section(const ExtractedFacts& facts) {
    std::string out = "# The error message from the failing test\n```text\n";
    out += *facts.error_info;
    if (out.back() != '\n') out += '\n';
    out += "```\n";
    return out;
}

inline std::string runtime_section(const ExtractedFacts& facts) {
    std::string out = "# Runtime values and types of variables inside the buggy function\n\n";
    out += "Each case below includes input parameter values and types, and the values and types "
           "of relevant variables at the function's return, derived from executing failing "
           "tests. If an input parameter is not reflected in the output, it is assumed to "
           "remain unchanged. Note that some of these values at the function's return might be "
           "incorrect. Analyze these cases to identify why the tests are failing to effectively "
           "fix the bug.\n";
    for (const auto& c : facts.runtime_cases) {
        out += "\n# Case " + std::to_string(c.case_id) + "\n";
        out += "## Runtime values and types of the input parameters of the buggy function\n";
        append_snapshot_lines(out, c.entry, "value");
        out += "\n## Runtime values and types of variables right before the buggy function's "
               "return\n";
        append_snapshot_lines(out, c.exit, "value");
    }
    return out;
}

inline std::string angelic_section(const ExtractedFacts& facts) {
    std::string out =
        "# Expected values and types of variables during the failing test execution\n\n";
    out += "Each case below includes input parameter values and types, and the expected values "
           "and types of relevant variables at the function's return. If an input parameter is "
           "not reflected in the output, it is assumed to remain unchanged. A corrected "
           "function must satisfy all these cases.\n";
    for (const auto& c : facts.angelic_cases) {
        out += "\n# Expected case " + std::to_string(c.case_id) + "\n";
        out += "## The values and types of buggy function's parameters\n";
        append_snapshot_lines(out, c.entry, "expected value");
        out += "\n## Expected values and types of variables right before the buggy function's "
               "return\n";
        append_snapshot_lines(out, c.exit, "expected value");
    }
    return out;
}

inline std::string issue_section(const ExtractedFacts& facts) {
    std::string out = "# A GitHub issue for this bug\nThe issue's title:\n```text\n";
    out += facts.issue->title;
    if (out.back() != '\n') out += '\n';
    out += "```\n\nThe issue's detailed description:\n```text\n";
    out += facts.issue->body;
    if (!facts.issue->body.empty() && out.back() != '\n') out += '\n';
    out += "```\n";
    return out;
}

} // namespace detail

/// Renders the full prompt for a job: import preamble, directive with
/// chain-of-thought steps, the function section, then the selected fact
/// sections in the plan's order (error info pinned after its failing test).
inline RenderedPrompt render(const PromptPlan& plan, const ExtractedFacts& facts,
                             std::string_view tokenizer_id = "default") {
    FactSet effective = plan.job.effective;
    detail::require_content(!effective.contains(FactKind::BuggyClass) ||
                                facts.class_declaration.has_value(),
                            FactKind::BuggyClass);
    detail::require_content(!effective.contains(FactKind::UsedMethodSignatures) ||
                                !facts.used_method_signatures.empty(),
                            FactKind::UsedMethodSignatures);
    detail::require_content(!effective.contains(FactKind::FailingTest) ||
                                !facts.failing_tests.empty(),
                            FactKind::FailingTest);
    detail::require_content(!effective.contains(FactKind::ErrorInfo) ||
                                facts.error_info.has_value(),
                            FactKind::ErrorInfo);
    detail::require_content(!effective.contains(FactKind::RuntimeInfo) ||
                                !facts.runtime_cases.empty(),
                            FactKind::RuntimeInfo);
    detail::require_content(!effective.contains(FactKind::AngelicForest) ||
                                !facts.angelic_cases.empty(),
                            FactKind::AngelicForest);
    detail::require_content(!effective.contains(FactKind::GitHubIssue) ||
                                facts.issue.has_value(),
                            FactKind::GitHubIssue);

    // Error info renders immediately after the failing test when both are
    // selected, whatever the requested permutation says.
    std::vector<FactKind> order;
    for (FactKind f : plan.fact_order)
        if (effective.contains(f)) order.push_back(f);
    bool both = effective.contains(FactKind::FailingTest) && effective.contains(FactKind::ErrorInfo);
    if (both) {
        order.erase(std::remove(order.begin(), order.end(), FactKind::ErrorInfo), order.end());
        auto ft_it = std::find(order.begin(), order.end(), FactKind::FailingTest);
        order.insert(ft_it + 1, FactKind::ErrorInfo);
    }

    std::string text;
    if (plan.include_import_preamble && !facts.imports.empty()) {
        text += "Assume that the following list of imports is available in the current "
                "environment, so you do not need to import them when generating a fix.\n"
                "```python\n";
        for (const auto& imp : facts.imports) text += imp + "\n";
        text += "```\n\n";
    }
    text += "Please fix the buggy function provided below and output a corrected version.\n";
    if (plan.include_cot) {
        text += "Following these steps:\n";
        text += cot_instructions(effective);
    }
    text += "\n" + detail::function_section(effective, facts);
    for (FactKind f : order) {
        text += "\n";
        switch (f) {
        case FactKind::FailingTest: text += detail::failing_test_section(facts); break;
        case FactKind::ErrorInfo: text += detail::error_info_section(facts); break;
        case FactKind::RuntimeInfo: text += detail::runtime_section(facts); break;
        case FactKind::AngelicForest: text += detail::angelic_section(facts); break;
        case FactKind::GitHubIssue: text += detail::issue_section(facts); break;
        default: break;
        }
    }

    RenderedPrompt out;
    out.text = std::move(text);
    out.char_length = detail::unicode_scalar_count(out.text);
    out.token_length = token_count(out.text, tokenizer_id);
    out.prompt_hash = Sha256::hex(out.text);
    return out;
}

} // namespace factsel
