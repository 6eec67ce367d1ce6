#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "pgx/errors.hpp"

namespace pgx {

/// The four supported perceptual tasks. Enum order is the canonical order
/// used for category names and canonical prompts.
enum class TaskKind : int {
    DynamicRangeEnhancement = 0, // DRE, restoration
    Denoising = 1,               // ID, restoration
    Foveation = 2,               // F, stylization
    Chromostereopsis = 3,        // C, stylization
};

constexpr int kTaskKindCount = 4;

inline const char* abbrev(TaskKind k) {
    switch (k) {
        case TaskKind::DynamicRangeEnhancement: return "DRE";
        case TaskKind::Denoising: return "ID";
        case TaskKind::Foveation: return "F";
        default: return "C";
    }
}

inline bool is_restoration(TaskKind k) {
    return k == TaskKind::DynamicRangeEnhancement || k == TaskKind::Denoising;
}

inline bool is_stylization(TaskKind k) { return !is_restoration(k); }

inline TaskKind task_from_abbrev(const std::string& s) {
    for (int i = 0; i < kTaskKindCount; ++i)
        if (s == abbrev(TaskKind(i))) return TaskKind(i);
    throw ContractError("unknown task abbreviation: " + s);
}

/// One task with its prompted intensity in (0, 1].
struct TaskSpec {
    TaskKind kind;
    double intensity = 1.0;

    bool operator==(const TaskSpec& o) const {
        return kind == o.kind && intensity == o.intensity;
    }
};

inline void check_tasks(const std::vector<TaskSpec>& tasks) {
    contract(!tasks.empty(), "task list must be non-empty");
    contract(tasks.size() <= std::size_t(kTaskKindCount), "at most four tasks");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        contract(tasks[i].intensity > 0.0 && tasks[i].intensity <= 1.0,
                 "task intensity must lie in (0,1]");
        for (std::size_t j = i + 1; j < tasks.size(); ++j)
            if (tasks[i].kind == tasks[j].kind)
                throw ContractError(std::string("duplicate task: ") + abbrev(tasks[i].kind));
    }
}

/// Canonical category key of a task set: kinds sorted in enum order and
/// joined with '+', e.g. "ID+F" or "DRE+ID+F+C".
inline std::string category_key(const std::vector<TaskSpec>& tasks) {
    std::vector<int> kinds;
    for (const auto& t : tasks) kinds.push_back(int(t.kind));
    std::sort(kinds.begin(), kinds.end());
    std::string out;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (i) out += '+';
        out += abbrev(TaskKind(kinds[i]));
    }
    return out;
}

inline std::vector<TaskKind> category_kinds(const std::string& key) {
    std::vector<TaskKind> out;
    std::string cur;
    for (char c : key + "+") {
        if (c == '+') {
            if (!cur.empty()) out.push_back(task_from_abbrev(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    contract(!out.empty(), "empty category key");
    return out;
}

/// The nine task categories evaluated in the quantitative comparison.
inline std::vector<std::string> table2_categories() {
    return {"F", "DRE", "ID", "C", "ID+C", "DRE+C", "ID+F", "DRE+F", "DRE+ID+F+C"};
}

inline std::vector<std::string> single_task_categories() { return {"DRE", "ID", "F", "C"}; }

inline bool is_single_task_category(const std::string& key) {
    return key.find('+') == std::string::npos;
}

} // namespace pgx
