#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgx/effects.hpp"
#include "pgx/image.hpp"
#include "pgx/png_io.hpp"
#include "pgx/prompts.hpp"
#include "pgx/rng.hpp"
#include "pgx/sources.hpp"

namespace pgx {

using json = nlohmann::json;

struct DatasetRecord {
    std::string id;
    std::string input_path;  // relative to the manifest directory
    std::string target_path; // relative to the manifest directory
    std::string prompt;
    std::vector<TaskSpec> tasks;
    std::string split = "train"; // "train" | "test"
};

struct ManifestHeader {
    int version = 1;
    std::uint64_t seed = 0;
    int resolution = 0;
    std::string source_provenance;
    std::string config_hash;
    std::map<std::string, long> counts; // per category, all splits
};

struct DatasetManifest {
    ManifestHeader header;
    std::vector<DatasetRecord> records;
    std::string root_dir; // directory the relative paths resolve against

    std::string resolve(const std::string& rel) const {
        return (std::filesystem::path(root_dir) / rel).string();
    }
};

struct DatasetBuildConfig {
    std::vector<std::string> categories = single_task_categories();
    int per_category = 40;
    std::map<std::string, int> per_category_overrides; // reduced-count builds
    int resolution = 128;
    std::uint64_t seed = 0;
    EffectParams effects;
    // Adjective draw per task: none / mildly / lightly / strongly.
    std::array<double, 4> adjective_probs{0.7, 0.1, 0.1, 0.1};
    int kmeans_k = 6;
    std::string source_provenance = "procedural";

    int count_for(const std::string& category) const {
        const auto it = per_category_overrides.find(category);
        return it == per_category_overrides.end() ? per_category : it->second;
    }

    long total_records() const {
        long total = 0;
        for (const auto& c : categories) total += count_for(c);
        return total;
    }

    json to_json() const {
        json j;
        j["categories"] = categories;
        j["per_category"] = per_category;
        j["per_category_overrides"] = per_category_overrides;
        j["resolution"] = resolution;
        j["seed"] = seed;
        j["adjective_probs"] = adjective_probs;
        j["kmeans_k"] = kmeans_k;
        j["effects"] = {{"fovea_radius", effects.fovea_radius},
                        {"sigma_max", effects.sigma_max},
                        {"noise_density", effects.noise_density},
                        {"quant_bits", effects.quant_bits},
                        {"depth_threshold", effects.depth_threshold},
                        {"hue_strength", effects.hue_strength},
                        {"gaze", {effects.gaze_x, effects.gaze_y}}};
        return j;
    }
};

namespace detail {

inline json record_to_json(const DatasetRecord& r) {
    json tasks = json::array();
    for (const auto& t : r.tasks) tasks.push_back({{"kind", abbrev(t.kind)}, {"intensity", t.intensity}});
    return json{{"id", r.id},           {"input", r.input_path}, {"target", r.target_path},
                {"prompt", r.prompt},   {"tasks", tasks},        {"split", r.split}};
}

inline DatasetRecord record_from_json(const json& j) {
    DatasetRecord r;
    r.id = j.at("id").get<std::string>();
    r.input_path = j.at("input").get<std::string>();
    r.target_path = j.at("target").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    r.split = j.at("split").get<std::string>();
    for (const auto& t : j.at("tasks"))
        r.tasks.push_back({task_from_abbrev(t.at("kind").get<std::string>()),
                           t.at("intensity").get<double>()});
    return r;
}

} // namespace detail

inline std::string category_of(const DatasetRecord& r) { return category_key(r.tasks); }

inline std::map<std::string, long> tally_categories(const DatasetManifest& m) {
    std::map<std::string, long> counts;
    for (const auto& c : m.header.counts) counts[c.first] = 0; // keep empty categories
    for (const auto& r : m.records) counts[category_of(r)]++;
    return counts;
}

/// Writes manifest.jsonl: a header object on the first line, then one record
/// object per line.
inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path);
    json header{{"type", "header"},
                {"version", m.header.version},
                {"seed", m.header.seed},
                {"resolution", m.header.resolution},
                {"source_provenance", m.header.source_provenance},
                {"config_hash", m.header.config_hash},
                {"counts", m.header.counts}};
    out << header.dump() << '\n';
    for (const auto& r : m.records) out << detail::record_to_json(r).dump() << '\n';
    if (!out) throw IoError("failed while writing manifest: " + path);
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read manifest: " + path);
    DatasetManifest m;
    m.root_dir = std::filesystem::path(path).parent_path().string();
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (!have_header) {
            if (j.value("type", "") != "header")
                throw IoError("manifest must start with a header object");
            m.header.version = j.at("version").get<int>();
            if (m.header.version != 1)
                throw VersionError("unsupported manifest version " +
                                   std::to_string(m.header.version));
            m.header.seed = j.at("seed").get<std::uint64_t>();
            m.header.resolution = j.at("resolution").get<int>();
            m.header.source_provenance = j.value("source_provenance", "");
            m.header.config_hash = j.value("config_hash", "");
            m.header.counts = j.at("counts").get<std::map<std::string, long>>();
            have_header = true;
        } else {
            m.records.push_back(detail::record_from_json(j));
        }
    }
    if (!have_header) throw IoError("manifest has no header: " + path);
    return m;
}

/// Manifest integrity: files exist, prompts re-parse to the stored tasks,
/// header counts match observed tallies.
inline void validate_manifest(const DatasetManifest& m, bool check_files = true) {
    for (const auto& r : m.records) {
        if (r.split != "train" && r.split != "test")
            throw ContractError("record " + r.id + " has invalid split '" + r.split + "'");
        const auto parsed = parse_prompt(r.prompt);
        if (!(parsed.tasks == r.tasks))
            throw ContractError("record " + r.id + " prompt does not re-parse to its tasks");
        if (check_files) {
            if (!std::filesystem::exists(m.resolve(r.input_path)))
                throw IoError("missing input image: " + m.resolve(r.input_path));
            if (!std::filesystem::exists(m.resolve(r.target_path)))
                throw IoError("missing target image: " + m.resolve(r.target_path));
        }
    }
    const auto tallies = tally_categories(m);
    for (const auto& [cat, n] : tallies) {
        const auto it = m.header.counts.find(cat);
        if (it == m.header.counts.end() || it->second != n)
            throw ContractError("header count mismatch for category " + cat);
    }
}

/// Stable content hash over the header and records (not the image bytes).
inline std::uint64_t manifest_hash(const DatasetManifest& m) {
    std::string blob = std::to_string(m.header.seed) + "|" +
                       std::to_string(m.header.resolution) + "|" + m.header.config_hash;
    for (const auto& r : m.records) blob += detail::record_to_json(r).dump() + "\n";
    return fnv1a64(blob);
}

/// Builds the paired dataset: per category, N pairs synthesized from the
/// source images in order, each with a canonical prompt whose adjectives are
/// sampled per config. Writes input/, target/, and manifest.jsonl under
/// out_dir. Deterministic per seed.
inline DatasetManifest build_dataset(const std::vector<Image>& sources,
                                     const DatasetBuildConfig& cfg, const std::string& out_dir) {
    contract(!cfg.categories.empty(), "no categories requested");
    contract(cfg.per_category >= 0, "per_category must be >= 0");
    const long total = cfg.total_records();
    if (long(sources.size()) < total)
        throw ContractError("insufficient source images: need " + std::to_string(total) +
                            ", have " + std::to_string(sources.size()));

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "input", ec);
    fs::create_directories(fs::path(out_dir) / "target", ec);
    if (ec) throw IoError("cannot create dataset directories under " + out_dir);

    struct Plan {
        std::string category;
        int index;
        std::uint64_t seed;
        long source_idx;
    };
    std::vector<Plan> plans;
    long source_idx = 0;
    for (const auto& cat : cfg.categories) {
        const int n = cfg.count_for(cat);
        for (int i = 0; i < n; ++i) {
            const std::string tag = cat + "#" + std::to_string(i);
            plans.push_back({cat, i, mix_seed(cfg.seed, fnv1a64(tag)), source_idx++});
        }
    }

    DatasetManifest m;
    m.root_dir = out_dir;
    m.header.seed = cfg.seed;
    m.header.resolution = cfg.resolution;
    m.header.source_provenance = cfg.source_provenance;
    m.header.config_hash = std::to_string(fnv1a64(cfg.to_json().dump()));
    m.records.resize(plans.size());

    std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (long pi = 0; pi < long(plans.size()); ++pi) {
        if (failure) continue;
        try {
            const Plan& plan = plans[pi];
            Rng rng(plan.seed);
            const auto kinds = category_kinds(plan.category);
            std::vector<TaskSpec> tasks;
            for (const auto kind : kinds) {
                // draw: none -> 1.0, mildly -> 0.3, lightly -> 0.6, strongly -> 1.0
                const double u = rng.uniform();
                const auto& pr = cfg.adjective_probs;
                double intensity = 1.0;
                if (u >= pr[0] && u < pr[0] + pr[1])
                    intensity = 0.3;
                else if (u >= pr[0] + pr[1] && u < pr[0] + pr[1] + pr[2])
                    intensity = 0.6;
                tasks.push_back({kind, intensity});
            }

            Image source = sources[plan.source_idx];
            if (source.width != cfg.resolution || source.height != cfg.resolution)
                source = center_crop_resize(source, cfg.resolution);

            EffectParams params = cfg.effects;
            params.seed = plan.seed;
            std::optional<SceneMaps> maps;
            for (const auto kind : kinds)
                if (kind == TaskKind::Chromostereopsis)
                    maps = fallback_scene_maps(source, cfg.kmeans_k, plan.seed);
            const auto pair = synthesize_pair(source, tasks, params, maps ? &*maps : nullptr);

            char idbuf[64];
            std::snprintf(idbuf, sizeof(idbuf), "%s_%05d", plan.category.c_str(), plan.index);
            DatasetRecord rec;
            rec.id = idbuf;
            rec.input_path = "input/" + rec.id + ".png";
            rec.target_path = "target/" + rec.id + ".png";
            rec.prompt = canonical_prompt(tasks);
            rec.tasks = tasks;
            write_png_rgb8(m.resolve(rec.input_path), pair.input);
            write_png_rgb8(m.resolve(rec.target_path), pair.target);
            m.records[pi] = std::move(rec);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    for (const auto& cat : cfg.categories)
        m.header.counts[cat] = 0;
    for (const auto& r : m.records) m.header.counts[category_of(r)]++;
    save_manifest(m, (std::filesystem::path(out_dir) / "manifest.jsonl").string());
    return m;
}

inline DatasetManifest build_dataset_from_dir(const std::string& sources_dir,
                                              const DatasetBuildConfig& cfg,
                                              const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    if (!fs::is_directory(sources_dir)) throw IoError("not a directory: " + sources_dir);
    for (const auto& e : fs::directory_iterator(sources_dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    std::vector<Image> sources;
    sources.reserve(files.size());
    for (const auto& f : files) sources.push_back(read_png_rgb8(f));
    DatasetBuildConfig c = cfg;
    c.source_provenance = "dir:" + sources_dir;
    return build_dataset(sources, c, out_dir);
}

/// Per-category stratified split; train and test are disjoint and the split
/// is deterministic per seed. The test share per category is
/// round(fraction * n).
inline void split_dataset(DatasetManifest& m, double fraction, std::uint64_t seed) {
    contract(fraction >= 0.0 && fraction <= 1.0, "test fraction outside [0,1]");
    std::map<std::string, std::vector<std::size_t>> by_cat;
    for (std::size_t i = 0; i < m.records.size(); ++i)
        by_cat[category_of(m.records[i])].push_back(i);
    for (auto& [cat, idxs] : by_cat) {
        Rng rng(mix_seed(seed, fnv1a64("split:" + cat)));
        rng.shuffle(idxs);
        const std::size_t n_test = std::size_t(std::lround(fraction * double(idxs.size())));
        for (std::size_t i = 0; i < idxs.size(); ++i)
            m.records[idxs[i]].split = i < n_test ? "test" : "train";
    }
}

enum class TrainPhase {
    SingleTask, // phase 1: single-task categories only
    All,        // phase 2: everything
};

/// Sample counts SC_T over the train split, per category. Categories known to
/// the manifest but absent from the split report 0.
inline std::map<std::string, long> sample_counts(const DatasetManifest& m, TrainPhase phase) {
    std::map<std::string, long> counts;
    for (const auto& c : m.header.counts)
        if (phase == TrainPhase::All || is_single_task_category(c.first)) counts[c.first] = 0;
    for (const auto& r : m.records) {
        if (r.split != "train") continue;
        const auto cat = category_of(r);
        if (phase == TrainPhase::SingleTask && !is_single_task_category(cat)) continue;
        counts[cat]++;
    }
    return counts;
}

} // namespace pgx
