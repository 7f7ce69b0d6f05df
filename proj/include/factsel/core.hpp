#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace factsel {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// The seven facts of the taxonomy, in taxonomy order. The bit position of
/// each fact is frozen; serialized bitvectors depend on it.
enum class FactKind : int {
    BuggyClass = 0,           // 1.1
    UsedMethodSignatures = 1, // 1.2
    FailingTest = 2,          // 1.3
    ErrorInfo = 3,            // 2.1
    RuntimeInfo = 4,          // 2.2
    AngelicForest = 5,        // 2.3
    GitHubIssue = 6,          // 3.1
};

inline constexpr int kNumFacts = 7;

inline constexpr std::array<FactKind, kNumFacts> all_facts() {
    return {FactKind::BuggyClass,   FactKind::UsedMethodSignatures,
            FactKind::FailingTest,  FactKind::ErrorInfo,
            FactKind::RuntimeInfo,  FactKind::AngelicForest,
            FactKind::GitHubIssue};
}

inline std::string_view fact_name(FactKind f) {
    switch (f) {
    case FactKind::BuggyClass: return "buggy_class";
    case FactKind::UsedMethodSignatures: return "used_method_signatures";
    case FactKind::FailingTest: return "failing_test";
    case FactKind::ErrorInfo: return "error_info";
    case FactKind::RuntimeInfo: return "runtime_info";
    case FactKind::AngelicForest: return "angelic_forest";
    case FactKind::GitHubIssue: return "github_issue";
    }
    return "?";
}

inline std::string_view fact_code(FactKind f) {
    switch (f) {
    case FactKind::BuggyClass: return "1.1";
    case FactKind::UsedMethodSignatures: return "1.2";
    case FactKind::FailingTest: return "1.3";
    case FactKind::ErrorInfo: return "2.1";
    case FactKind::RuntimeInfo: return "2.2";
    case FactKind::AngelicForest: return "2.3";
    case FactKind::GitHubIssue: return "3.1";
    }
    return "?";
}

/// A subset of the seven facts. The string form is a 7-character binary
/// string in taxonomy order; the most significant character is BuggyClass.
/// Its integer reading doubles as the deterministic tie-break order.
class FactSet {
public:
    constexpr FactSet() = default;
    constexpr explicit FactSet(std::uint8_t value) : value_(value) {
        if (value > 0x7f) throw Error("FactSet value out of range");
    }

    static FactSet parse(std::string_view bits) {
        if (bits.size() != kNumFacts)
            throw Error("bitvector must be exactly 7 characters: '" + std::string(bits) + "'");
        std::uint8_t v = 0;
        for (char c : bits) {
            if (c != '0' && c != '1')
                throw Error("bitvector may contain only '0'/'1': '" + std::string(bits) + "'");
            v = static_cast<std::uint8_t>((v << 1) | (c == '1'));
        }
        return FactSet(v);
    }

    static constexpr FactSet none() { return FactSet(0); }
    static constexpr FactSet all() { return FactSet(0x7f); }

    static FactSet of(std::initializer_list<FactKind> facts) {
        FactSet s;
        for (FactKind f : facts) s = s.with(f);
        return s;
    }

    std::string to_string() const {
        std::string out(kNumFacts, '0');
        for (int i = 0; i < kNumFacts; ++i)
            if (value_ & (1u << (kNumFacts - 1 - i))) out[i] = '1';
        return out;
    }

    constexpr bool contains(FactKind f) const {
        return (value_ >> (kNumFacts - 1 - static_cast<int>(f))) & 1u;
    }

    constexpr FactSet with(FactKind f) const {
        return FactSet(static_cast<std::uint8_t>(
            value_ | (1u << (kNumFacts - 1 - static_cast<int>(f)))));
    }

    constexpr FactSet without(FactKind f) const {
        return FactSet(static_cast<std::uint8_t>(
            value_ & ~(1u << (kNumFacts - 1 - static_cast<int>(f)))));
    }

    constexpr FactSet operator&(FactSet o) const {
        return FactSet(static_cast<std::uint8_t>(value_ & o.value_));
    }
    constexpr FactSet operator|(FactSet o) const {
        return FactSet(static_cast<std::uint8_t>(value_ | o.value_));
    }

    constexpr bool subset_of(FactSet o) const { return (value_ & o.value_) == value_; }

    constexpr int count() const {
        int c = 0;
        for (int i = 0; i < kNumFacts; ++i) c += (value_ >> i) & 1;
        return c;
    }

    constexpr std::uint8_t value() const { return value_; }

    constexpr auto operator<=>(const FactSet&) const = default;

private:
    std::uint8_t value_ = 0;
};

/// One (bug, fact set) pair; the unit of prompting and evaluation.
/// `effective` is `requested` masked by what the bug actually provides.
struct Job {
    std::string bug_id;
    FactSet requested;
    FactSet effective;

    bool operator==(const Job&) const = default;
};

enum class Verdict {
    Plausible,
    TestFail,
    PatchExtractionFail,
    BuildError,
    Timeout,
};

inline std::string_view verdict_name(Verdict v) {
    switch (v) {
    case Verdict::Plausible: return "plausible";
    case Verdict::TestFail: return "test_fail";
    case Verdict::PatchExtractionFail: return "patch_extraction_fail";
    case Verdict::BuildError: return "build_error";
    case Verdict::Timeout: return "timeout";
    }
    return "?";
}

inline Verdict verdict_from_name(std::string_view s) {
    for (Verdict v : {Verdict::Plausible, Verdict::TestFail, Verdict::PatchExtractionFail,
                      Verdict::BuildError, Verdict::Timeout})
        if (verdict_name(v) == s) return v;
    throw Error("unknown verdict: " + std::string(s));
}

} // namespace factsel
