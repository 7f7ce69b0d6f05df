#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "factsel/core.hpp"

namespace factsel {

/// Byte-pair tokenizer over a ranked merge table loaded from a data file.
/// Offline and deterministic; prompt lengths in tokens must not depend on a
/// remote service.
class BpeTokenizer {
public:
    static BpeTokenizer from_merges_text(std::string_view text) {
        BpeTokenizer tok;
        std::istringstream in{std::string(text)};
        std::string line;
        int rank = 0;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::size_t sp = line.find(' ');
            if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size())
                throw Error("malformed BPE merge line: '" + line + "'");
            tok.ranks_[{line.substr(0, sp), line.substr(sp + 1)}] = rank++;
        }
        return tok;
    }

    static BpeTokenizer from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read tokenizer vocabulary: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return from_merges_text(ss.str());
    }

    std::size_t count(std::string_view text) const {
        if (text.empty()) return 0;
        std::vector<std::string> parts;
        parts.reserve(text.size());
        for (char c : text) parts.emplace_back(1, c);
        while (parts.size() > 1) {
            int best_rank = -1;
            std::size_t best_at = 0;
            for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
                auto it = ranks_.find({parts[i], parts[i + 1]});
                if (it != ranks_.end() && (best_rank < 0 || it->second < best_rank)) {
                    best_rank = it->second;
                    best_at = i;
                }
            }
            if (best_rank < 0) break;
            parts[best_at] += parts[best_at + 1];
            parts.erase(parts.begin() + best_at + 1);
        }
        return parts.size();
    }

private:
    std::map<std::pair<std::string, std::string>, int> ranks_;
};

namespace detail {

// Compiled-in copy of data/tokenizer/default.merges so token counts work
// without locating the data directory.
inline constexpr std::string_view kDefaultMerges = R"(# factsel-bpe v1
e r
i n
o n
a n
t h
e n
r e
a t
o r
e s
t e
a l
s t
a r
n t
t i
s e
l e
d e
o u
r o
i s
i t
u n
c o
m e
l i
a s
h e
c t
i on
th e
in g
de f
se lf
re turn
co de
te st
er r
or t
v al
f un
cl as
clas s
im port
a a
aa aa
aaaa aaaa
)";

} // namespace detail

inline const BpeTokenizer& builtin_tokenizer() {
    static BpeTokenizer tok = BpeTokenizer::from_merges_text(detail::kDefaultMerges);
    return tok;
}

inline const std::vector<std::string>& tokenizer_ids() {
    static std::vector<std::string> ids = {"default"};
    return ids;
}

inline std::size_t token_count(std::string_view text, std::string_view tokenizer_id = "default") {
    if (tokenizer_id == "default") return builtin_tokenizer().count(text);
    std::string known;
    for (const auto& id : tokenizer_ids()) known += (known.empty() ? "" : ", ") + id;
    throw Error("unknown tokenizer '" + std::string(tokenizer_id) + "'; available: " + known);
}

} // namespace factsel
