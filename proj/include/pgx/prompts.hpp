#pragma once

#include <array>
#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "pgx/errors.hpp"
#include "pgx/tasks.hpp"

namespace pgx {

/// Parsed form of a text prompt T: the raw text plus the ordered task list.
struct PromptSpec {
    std::string raw_text;
    std::vector<TaskSpec> tasks;

    bool operator==(const PromptSpec& o) const { return tasks == o.tasks; }
};

struct AdjectiveEntry {
    const char* word;
    double intensity;
};

/// Intensity adjectives. A phrase without an adjective means full intensity.
inline const std::array<AdjectiveEntry, 4>& adjective_table() {
    static const std::array<AdjectiveEntry, 4> table{{
        {"mildly", 0.3},
        {"slightly", 0.45},
        {"lightly", 0.6},
        {"strongly", 1.0},
    }};
    return table;
}

inline const char* verb_phrase(TaskKind k) {
    switch (k) {
        case TaskKind::Foveation: return "foveate";
        case TaskKind::Denoising: return "denoise";
        case TaskKind::DynamicRangeEnhancement: return "enhance dynamic range";
        default: return "apply chromostereopsis";
    }
}

namespace detail {

inline std::vector<std::string> tokenize_lower(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) tokens.push_back(cur);
            cur.clear();
        } else {
            cur += char(std::tolower(static_cast<unsigned char>(ch)));
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

inline std::string join(const std::vector<std::string>& tokens, std::size_t lo, std::size_t hi) {
    std::string out;
    for (std::size_t i = lo; i < hi; ++i) {
        if (i > lo) out += ' ';
        out += tokens[i];
    }
    return out;
}

} // namespace detail

/// Parses the closed prompt grammar:
///   prompt := phrase ("and" phrase)*
///   phrase := [adjective] verb_phrase
/// Verbs: "foveate", "denoise", "enhance dynamic range",
/// "apply chromostereopsis". Case-insensitive; whitespace-normalized.
/// Unknown tokens, duplicate tasks, and empty prompts raise ParseError
/// naming the offending token.
inline PromptSpec parse_prompt(const std::string& text) {
    const auto tokens = detail::tokenize_lower(text);
    if (tokens.empty()) throw ParseError("empty prompt");

    PromptSpec spec;
    spec.raw_text = text;

    std::vector<std::vector<std::string>> phrases(1);
    for (const auto& tok : tokens) {
        if (tok == "and")
            phrases.emplace_back();
        else
            phrases.back().push_back(tok);
    }

    for (const auto& phrase : phrases) {
        if (phrase.empty()) throw ParseError("empty phrase around 'and'");
        std::size_t pos = 0;
        double intensity = 1.0;
        for (const auto& adj : adjective_table())
            if (phrase[0] == adj.word) {
                intensity = adj.intensity;
                pos = 1;
                break;
            }
        if (pos >= phrase.size())
            throw ParseError("adjective '" + phrase[0] + "' is missing a verb");
        const std::string rest = detail::join(phrase, pos, phrase.size());
        bool matched = false;
        for (int i = 0; i < kTaskKindCount; ++i) {
            const TaskKind kind = TaskKind(i);
            if (rest == verb_phrase(kind)) {
                for (const auto& t : spec.tasks)
                    if (t.kind == kind)
                        throw ParseError("duplicate task '" + rest + "'");
                spec.tasks.push_back({kind, intensity});
                matched = true;
                break;
            }
        }
        if (!matched) throw ParseError("unknown verb '" + phrase[pos] + "'");
    }
    if (spec.tasks.size() > std::size_t(kTaskKindCount))
        throw ParseError("too many tasks in prompt");
    return spec;
}

/// Deterministic rendering; parse_prompt(canonical_prompt(s)) == s for every
/// valid spec. Intensity 1.0 renders without an adjective.
inline std::string canonical_prompt(const PromptSpec& spec) {
    check_tasks(spec.tasks);
    std::string out;
    for (std::size_t i = 0; i < spec.tasks.size(); ++i) {
        const auto& t = spec.tasks[i];
        if (i) out += " and ";
        if (t.intensity != 1.0) {
            bool found = false;
            for (const auto& adj : adjective_table())
                if (t.intensity == adj.intensity) {
                    out += adj.word;
                    out += ' ';
                    found = true;
                    break;
                }
            if (!found)
                throw ContractError("intensity " + std::to_string(t.intensity) +
                                    " has no adjective");
        }
        out += verb_phrase(t.kind);
    }
    return out;
}

inline std::string canonical_prompt(const std::vector<TaskSpec>& tasks) {
    return canonical_prompt(PromptSpec{"", tasks});
}

} // namespace pgx
