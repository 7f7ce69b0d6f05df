#pragma once

#include <algorithm>
#include <cctype>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factsel/core.hpp"
#include "factsel/corpus.hpp"

namespace factsel {

struct FunctionNode {
    std::string name;
    int header_line = 0; // 1-based line of the `def`
    int end_line = 0;    // last line of the body (1-based, inclusive)
    int indent = 0;      // columns of leading whitespace of the `def`
    std::string signature; // "name(args) -> ret", no `def`/colon
    std::optional<std::string> docstring;
    std::optional<int> class_index; // enclosing class, innermost
    std::vector<std::string> plain_calls; // statically resolvable `name(...)`
    std::vector<std::string> self_calls;  // `self.name(...)`
};

struct ClassNode {
    std::string name;
    int header_line = 0;
    int end_line = 0;
    int indent = 0;
    std::string declaration; // header text without `class`/colon, e.g. "Foo(Base)"
    std::optional<std::string> docstring;
};

struct ModuleInfo {
    std::vector<FunctionNode> functions;
    std::vector<ClassNode> classes;
    std::vector<std::string> imports; // module-level import statements, verbatim
};

/// Grammar front-end for the benchmark language. One bundled implementation
/// (PythonParser); swappable for testing with tiny grammars.
class SourceParser {
public:
    virtual ~SourceParser() = default;
    virtual ModuleInfo parse(std::string_view source) const = 0;
    /// 1 + number of decision points (if/elif, loop headers, and/or,
    /// conditional expressions, exception handlers, comprehension conditions).
    virtual int cyclomatic_complexity(std::string_view function_code) const = 0;
};

namespace detail {

// Blanks out comments and string literal contents (keeping line structure)
// so that keyword and structure scans cannot be fooled by text in strings.
inline std::string strip_strings_and_comments(std::string_view src) {
    std::string out(src);
    std::size_t i = 0;
    auto starts = [&](std::size_t pos, std::string_view pat) {
        return src.compare(pos, pat.size(), pat) == 0;
    };
    while (i < out.size()) {
        char c = src[i];
        if (c == '#') {
            while (i < out.size() && src[i] != '\n') out[i++] = ' ';
        } else if (c == '"' || c == '\'') {
            std::string_view triple = (c == '"') ? "\"\"\"" : "'''";
            bool is_triple = starts(i, triple);
            std::size_t quote_len = is_triple ? 3 : 1;
            std::size_t j = i + quote_len;
            bool closed = false;
            while (j < out.size()) {
                if (src[j] == '\\') {
                    j += 2;
                    continue;
                }
                if (!is_triple && src[j] == '\n') break; // unterminated single-quote
                if (is_triple ? starts(j, triple) : src[j] == c) {
                    closed = true;
                    break;
                }
                ++j;
            }
            if (!closed && !is_triple)
                throw Error("unterminated string literal");
            std::size_t close = closed ? j : out.size();
            for (std::size_t p = i + quote_len; p < close && p < out.size(); ++p)
                if (out[p] != '\n') out[p] = ' ';
            i = std::min(out.size(), close + quote_len);
        } else {
            ++i;
        }
    }
    return out;
}

inline bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

inline int indent_of(std::string_view line) {
    int n = 0;
    for (char c : line) {
        if (c == ' ') ++n;
        else if (c == '\t') n += 8;
        else break;
    }
    return n;
}

inline bool is_blank(std::string_view line) {
    return line.find_first_not_of(" \t") == std::string_view::npos;
}

// Extracts the string literal if `lines[idx]` starts a docstring; the
// literal is read from the original (unstripped) source lines.
inline std::optional<std::string> read_docstring(const std::vector<std::string>& raw,
                                                 std::size_t idx) {
    if (idx >= raw.size()) return std::nullopt;
    std::string_view line = raw[idx];
    std::size_t pos = line.find_first_not_of(" \t");
    if (pos == std::string_view::npos) return std::nullopt;
    std::string_view rest = line.substr(pos);
    std::string_view quote;
    for (std::string_view q : {"\"\"\"", "'''", "\"", "'"})
        if (rest.substr(0, q.size()) == q) {
            quote = q;
            break;
        }
    if (quote.empty()) return std::nullopt;
    std::string text(rest);
    if (rest.size() >= 2 * quote.size() && rest.find(quote, quote.size()) != std::string_view::npos)
        return text; // one-line docstring
    if (quote.size() == 1) return std::nullopt;
    for (std::size_t j = idx + 1; j < raw.size(); ++j) {
        text += "\n" + raw[j];
        if (raw[j].find(quote) != std::string::npos) return text;
    }
    return std::nullopt;
}

} // namespace detail

class PythonParser final : public SourceParser {
public:
    ModuleInfo parse(std::string_view source) const override {
        ModuleInfo mod;
        std::string stripped = detail::strip_strings_and_comments(source);
        std::vector<std::string> raw = detail::split_lines(source);
        std::vector<std::string> lines = detail::split_lines(stripped);

        struct OpenBlock {
            bool is_class;
            std::size_t index; // into mod.functions or mod.classes
            int indent;
        };
        std::vector<OpenBlock> stack;

        auto close_to = [&](int indent, int line_no) {
            while (!stack.empty() && stack.back().indent >= indent) {
                auto& b = stack.back();
                int end = line_no - 1;
                if (b.is_class) mod.classes[b.index].end_line = end;
                else mod.functions[b.index].end_line = end;
                stack.pop_back();
            }
        };

        for (std::size_t i = 0; i < lines.size(); ++i) {
            const std::string& line = lines[i];
            if (detail::is_blank(line)) continue;
            int indent = detail::indent_of(line);
            close_to(indent, static_cast<int>(i) + 1);

            std::string_view body = std::string_view(line).substr(line.find_first_not_of(" \t"));
            if (body.starts_with("def ") || body.starts_with("async def ") ||
                body.starts_with("class ")) {
                bool is_class = body.starts_with("class ");
                // Headers may span lines; join until the colon at depth 0.
                std::string header(body);
                std::size_t last = i;
                int depth = 0;
                auto done = [&] {
                    depth = 0;
                    for (char c : header) {
                        if (c == '(' || c == '[' || c == '{') ++depth;
                        else if (c == ')' || c == ']' || c == '}') --depth;
                    }
                    std::size_t colon = header.rfind(':');
                    return depth == 0 && colon != std::string::npos;
                };
                while (!done() && last + 1 < lines.size()) {
                    ++last;
                    header += " " + lines[last].substr(lines[last].find_first_not_of(" \t") ==
                                                               std::string::npos
                                                           ? 0
                                                           : lines[last].find_first_not_of(" \t"));
                }
                if (!done()) throw Error("unterminated def/class header at line " +
                                         std::to_string(i + 1));
                std::size_t colon = header.rfind(':');
                std::string head = header.substr(0, colon);
                // Collapse runs of whitespace left by multi-line joins.
                std::string compact;
                for (char c : head) {
                    if (std::isspace(static_cast<unsigned char>(c))) {
                        if (!compact.empty() && compact.back() != ' ') compact.push_back(' ');
                    } else {
                        compact.push_back(c);
                    }
                }
                if (is_class) {
                    ClassNode cls;
                    cls.indent = indent;
                    cls.header_line = static_cast<int>(i) + 1;
                    cls.end_line = static_cast<int>(lines.size());
                    cls.declaration = compact.substr(std::string("class ").size());
                    std::size_t sp = cls.declaration.find_first_of(" (");
                    cls.name = cls.declaration.substr(0, sp);
                    cls.docstring = detail::read_docstring(raw, last + 1);
                    mod.classes.push_back(std::move(cls));
                    stack.push_back({true, mod.classes.size() - 1, indent});
                } else {
                    FunctionNode fn;
                    fn.indent = indent;
                    fn.header_line = static_cast<int>(i) + 1;
                    fn.end_line = static_cast<int>(lines.size());
                    std::size_t def_kw = compact.find("def ");
                    fn.signature = compact.substr(def_kw + 4);
                    std::size_t paren = fn.signature.find('(');
                    fn.name = fn.signature.substr(0, paren);
                    for (auto it = stack.rbegin(); it != stack.rend(); ++it)
                        if (it->is_class) {
                            fn.class_index = static_cast<int>(it->index);
                            break;
                        }
                    fn.docstring = detail::read_docstring(raw, last + 1);
                    mod.functions.push_back(std::move(fn));
                    stack.push_back({false, mod.functions.size() - 1, indent});
                }
                i = last;
            } else if (indent == 0 &&
                       (body.starts_with("import ") || body.starts_with("from "))) {
                mod.imports.emplace_back(raw[i].substr(raw[i].find_first_not_of(" \t")));
            }
        }
        close_to(0, static_cast<int>(lines.size()) + 1);

        // Call scan per function over its stripped body.
        for (auto& fn : mod.functions) {
            std::string blob;
            for (int ln = fn.header_line; ln <= fn.end_line && ln <= (int)lines.size(); ++ln)
                blob += lines[ln - 1] + "\n";
            // Skip the header itself so parameter defaults don't look like calls.
            std::size_t body_start = blob.find(':');
            scan_calls(blob.substr(body_start == std::string::npos ? 0 : body_start + 1), fn);
        }
        return mod;
    }

    int cyclomatic_complexity(std::string_view function_code) const override {
        std::string stripped = detail::strip_strings_and_comments(function_code);
        if (stripped.find("def ") == std::string::npos)
            throw Error("cyclomatic complexity expects a single function definition");
        int cc = 1;
        std::size_t i = 0;
        while (i < stripped.size()) {
            if (detail::is_ident_char(stripped[i])) {
                std::size_t j = i;
                while (j < stripped.size() && detail::is_ident_char(stripped[j])) ++j;
                std::string_view word(stripped.data() + i, j - i);
                if (word == "if" || word == "elif" || word == "for" || word == "while" ||
                    word == "and" || word == "or" || word == "except")
                    ++cc;
                i = j;
            } else {
                ++i;
            }
        }
        return cc;
    }

private:
    static void scan_calls(std::string_view body, FunctionNode& fn) {
        static const std::vector<std::string_view> keywords = {
            "if",    "elif",  "else",  "for",   "while", "def",   "class", "return",
            "yield", "with",  "try",   "except","raise", "assert","lambda","not",
            "and",   "or",    "in",    "is",    "print", "del",   "pass",  "import"};
        std::size_t i = 0;
        auto push_unique = [](std::vector<std::string>& v, std::string name) {
            if (std::find(v.begin(), v.end(), name) == v.end()) v.push_back(std::move(name));
        };
        while (i < body.size()) {
            if (!detail::is_ident_char(body[i])) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < body.size() && detail::is_ident_char(body[j])) ++j;
            std::string_view word = body.substr(i, j - i);
            std::size_t k = j;
            while (k < body.size() && (body[k] == ' ' || body[k] == '\t')) ++k;
            bool is_call = k < body.size() && body[k] == '(';
            bool dotted_before = i > 0 && body[i - 1] == '.';
            bool dotted_after = k < body.size() && body[k] == '.';
            if (is_call && !dotted_after &&
                std::find(keywords.begin(), keywords.end(), word) == keywords.end() &&
                !(std::isdigit(static_cast<unsigned char>(word[0])))) {
                if (dotted_before) {
                    // Only `self.<name>(...)` is statically resolvable here.
                    if (i >= 5 && body.substr(i - 5, 5) == "self.")
                        push_unique(fn.self_calls, std::string(word));
                } else {
                    push_unique(fn.plain_calls, std::string(word));
                }
            }
            i = j;
        }
    }
};

inline const SourceParser& default_parser() {
    static PythonParser parser;
    return parser;
}

} // namespace factsel
