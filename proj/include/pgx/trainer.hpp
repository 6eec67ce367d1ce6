#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pgx/dataset.hpp"
#include "pgx/embedding.hpp"
#include "pgx/losses.hpp"
#include "pgx/metrics.hpp"
#include "pgx/model.hpp"
#include "pgx/tensor_image.hpp"

namespace pgx {

struct LossConfig {
    double lambda = 100.0;
    double b_max = 4.0;
    bool gan_label_smoothing = false;

    nlohmann::json to_json() const {
        return {{"lambda", lambda},
                {"b_max", b_max},
                {"gan_label_smoothing", gan_label_smoothing}};
    }
    static LossConfig from_json(const nlohmann::json& j) {
        LossConfig c;
        c.lambda = j.value("lambda", 100.0);
        c.b_max = j.value("b_max", 4.0);
        c.gan_label_smoothing = j.value("gan_label_smoothing", false);
        return c;
    }
};

struct TrainSchedule {
    int phase1_epochs = 8;  // single-task categories only
    int phase2_epochs = 12; // all categories
    int batch_size = 4;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    std::uint64_t seed = 0;
    int checkpoint_every = 0; // epochs between snapshots; 0 writes only the final one
    int probe_per_category = 2;
    std::string run_dir; // empty disables metrics/checkpoint files

    nlohmann::json to_json() const {
        return {{"phase1_epochs", phase1_epochs}, {"phase2_epochs", phase2_epochs},
                {"batch_size", batch_size},       {"lr", lr},
                {"beta1", beta1},                 {"beta2", beta2},
                {"seed", seed},                   {"checkpoint_every", checkpoint_every},
                {"probe_per_category", probe_per_category}};
    }
    static TrainSchedule from_json(const nlohmann::json& j) {
        TrainSchedule s;
        s.phase1_epochs = j.value("phase1_epochs", 8);
        s.phase2_epochs = j.value("phase2_epochs", 12);
        s.batch_size = j.value("batch_size", 4);
        s.lr = j.value("lr", 2e-4);
        s.beta1 = j.value("beta1", 0.5);
        s.beta2 = j.value("beta2", 0.999);
        s.seed = j.value("seed", std::uint64_t(0));
        s.checkpoint_every = j.value("checkpoint_every", 0);
        s.probe_per_category = j.value("probe_per_category", 2);
        return s;
    }
};

struct EpochLog {
    int epoch = 0;
    int phase = 0;
    double d_loss = 0.0;
    double g_gan = 0.0;
    double ta_l1 = 0.0;
    double total = 0.0;
    std::map<std::string, double> probe_psnr;
};

struct TrainResult {
    ModelBundle bundle;
    std::vector<EpochLog> log;
    std::string metrics_path;
};

/// Restricts a manifest to the given categories, optionally capping the
/// number of train records kept per category (test records are kept whole).
/// Header counts are recomputed. Used by baselines and the ablation grid.
inline DatasetManifest filter_manifest(const DatasetManifest& m,
                                       const std::vector<std::string>& categories,
                                       const std::map<std::string, int>& train_caps = {}) {
    DatasetManifest out;
    out.header = m.header;
    out.root_dir = m.root_dir;
    out.header.counts.clear();
    std::map<std::string, int> kept;
    for (const auto& cat : categories) out.header.counts[cat] = 0;
    for (const auto& r : m.records) {
        const auto cat = category_of(r);
        if (std::find(categories.begin(), categories.end(), cat) == categories.end()) continue;
        if (r.split == "train") {
            const auto cap = train_caps.find(cat);
            if (cap != train_caps.end() && kept[cat] >= cap->second) continue;
            kept[cat]++;
        }
        out.records.push_back(r);
        out.header.counts[cat]++;
    }
    return out;
}

namespace detail {

struct LoadedRecord {
    Tensor<float> input;  // (3,S,S) signed
    Tensor<float> target; // (3,S,S) signed
    const float* embedding = nullptr;
    std::string category;
};

} // namespace detail

/// Two-phase adversarial training: phase 1 samples single-task pairs only,
/// phase 2 everything. Each batch takes one discriminator step (real + fake)
/// and one generator step (adversarial + boosted L1). Boost factors are
/// recomputed per phase from the train-split sample counts. Deterministic per
/// seed up to float non-associativity in the BLAS backend (same binary and
/// thread count reproduce bit-identically).
inline TrainResult train(const DatasetManifest& manifest, const GeneratorConfig& gcfg,
                         const DiscriminatorConfig& dcfg, const LossConfig& loss_cfg,
                         const TrainSchedule& sched, const TextEncoder& encoder) {
    gcfg.validate();
    dcfg.validate();
    contract(sched.batch_size >= 1, "batch_size must be >= 1");
    contract(sched.phase1_epochs >= 0 && sched.phase2_epochs >= 0,
             "phase epochs must be non-negative");

    // Load the train split into memory.
    std::vector<detail::LoadedRecord> records;
    std::map<std::string, TextEmbedding> prompt_cache;
    std::vector<std::size_t> single_task_idx, all_idx;
    for (const auto& r : manifest.records) {
        if (r.split != "train") continue;
        detail::LoadedRecord lr;
        lr.input = image_to_signed_chw(read_png_rgb8(manifest.resolve(r.input_path)));
        lr.target = image_to_signed_chw(read_png_rgb8(manifest.resolve(r.target_path)));
        contract(lr.input.dim(1) == gcfg.image_size && lr.input.dim(2) == gcfg.image_size,
                 "record " + r.id + " does not match the configured image size");
        lr.category = category_of(r);
        auto [it, fresh] = prompt_cache.try_emplace(r.prompt);
        if (fresh) it->second = encoder.embed(r.prompt);
        records.push_back(std::move(lr));
        records.back().embedding = prompt_cache.at(r.prompt).vec.data();
        const auto idx = records.size() - 1;
        all_idx.push_back(idx);
        if (is_single_task_category(records.back().category)) single_task_idx.push_back(idx);
    }
    if (records.empty()) throw ContractError("manifest has no train records");
    if (sched.phase1_epochs > 0 && single_task_idx.empty())
        throw ContractError("phase 1 requires at least one single-task category");
    if (gcfg.text_conditioning)
        contract(encoder.dim() == gcfg.text_dim, "encoder dim does not match generator config");

    // Held-out probe per category (test split preferred, else train records).
    std::map<std::string, std::vector<const DatasetRecord*>> probes;
    for (const auto& r : manifest.records)
        if (r.split == "test" &&
            int(probes[category_of(r)].size()) < sched.probe_per_category)
            probes[category_of(r)].push_back(&r);
    for (const auto& r : manifest.records)
        if (r.split == "train" && probes[category_of(r)].empty()) probes[category_of(r)].push_back(&r);

    TrainResult result{ModelBundle(gcfg, dcfg, encoder.id()), {}, ""};
    ModelBundle& bundle = result.bundle;
    const int text_dim = gcfg.text_dim;

    nn::Adam<float> opt_g(sched.lr, sched.beta1, sched.beta2);
    nn::Adam<float> opt_d(sched.lr, sched.beta1, sched.beta2);
    auto g_params = bundle.g.params();
    auto d_params = bundle.d.params();

    std::ofstream metrics;
    if (!sched.run_dir.empty()) {
        std::filesystem::create_directories(sched.run_dir);
        result.metrics_path =
            (std::filesystem::path(sched.run_dir) / "metrics.jsonl").string();
        metrics.open(result.metrics_path, std::ios::trunc);
        if (!metrics) throw IoError("cannot write metrics log: " + result.metrics_path);
        nlohmann::json header{{"type", "train-config"},
                              {"generator", gcfg.to_json()},
                              {"discriminator", dcfg.to_json()},
                              {"loss", loss_cfg.to_json()},
                              {"schedule", sched.to_json()},
                              {"provider_id", encoder.id()}};
        metrics << header.dump() << "\n";
    }

    const int total_epochs = sched.phase1_epochs + sched.phase2_epochs;
    const int S = gcfg.image_size;

    auto probe_psnr = [&]() {
        std::map<std::string, double> out;
        for (const auto& [cat, recs] : probes) {
            if (recs.empty()) continue;
            double acc = 0.0;
            for (const auto* r : recs) {
                const Image in_img = read_png_rgb8(manifest.resolve(r->input_path));
                const Image gt_img = read_png_rgb8(manifest.resolve(r->target_path));
                Tensor<float> x({1, 3, S, S});
                auto chw = image_to_signed_chw(in_img);
                std::copy(chw.data.begin(), chw.data.end(), x.data.begin());
                Tensor<float> et({1, text_dim});
                const auto emb = encoder.embed(r->prompt);
                std::copy(emb.vec.begin(), emb.vec.end(), et.data.begin());
                const auto y = bundle.g.forward(x, et);
                const double v = psnr(signed_chw_to_image(y), gt_img);
                acc += std::isinf(v) ? 99.0 : v;
            }
            out[cat] = acc / double(recs.size());
        }
        return out;
    };

    for (int epoch = 0; epoch < total_epochs; ++epoch) {
        const bool phase1 = epoch < sched.phase1_epochs;
        const auto phase = phase1 ? TrainPhase::SingleTask : TrainPhase::All;
        const auto& pool = phase1 ? single_task_idx : all_idx;
        const auto counts = sample_counts(manifest, phase);
        const auto boosts = boost_factors(counts, loss_cfg.b_max);

        std::vector<std::size_t> order = pool;
        Rng shuffle_rng(mix_seed(sched.seed, fnv1a64("epoch") + epoch));
        shuffle_rng.shuffle(order);

        double ep_d = 0.0, ep_g = 0.0, ep_l1 = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < order.size(); start += sched.batch_size) {
            const int nb = int(std::min<std::size_t>(sched.batch_size, order.size() - start));
            Tensor<float> x({nb, 3, S, S}), gt({nb, 3, S, S}), et({nb, text_dim});
            std::vector<double> item_boosts(nb);
            for (int b = 0; b < nb; ++b) {
                const auto& rec = records[order[start + b]];
                std::copy(rec.input.data.begin(), rec.input.data.end(),
                          x.data.begin() + std::size_t(b) * rec.input.size());
                std::copy(rec.target.data.begin(), rec.target.data.end(),
                          gt.data.begin() + std::size_t(b) * rec.target.size());
                std::copy_n(rec.embedding, text_dim, et.data.begin() + std::size_t(b) * text_dim);
                item_boosts[b] = boosts.at(rec.category);
            }

            // one generator forward serves the whole batch step
            const auto y = bundle.g.forward(x, et);

            // discriminator step: ascend Eq. 2 on (real, fake); each backward
            // runs against the caches of its own forward
            opt_d.zero_grad(d_params);
            const auto p0 = bundle.d.forward(x, gt, et);
            bundle.d.backward(
                tcgan_d_real_backward(p0, loss_cfg.gan_label_smoothing ? 0.9 : 1.0), true);
            const auto p1 = bundle.d.forward(x, y, et);
            bundle.d.backward(tcgan_d_fake_backward(p1), true);
            const auto gan_at_d = tcgan_losses(p0, p1);
            opt_d.step(d_params);

            // generator step: non-saturating adversarial + boosted L1
            opt_g.zero_grad(g_params);
            const auto p1g = bundle.d.forward(x, y, et);
            const double g_gan = tcgan_losses(p0, p1g).g_loss;
            auto dy = bundle.d.backward(tcgan_g_backward(p1g), false);
            const double l1 = ta_l1_loss(y, gt, item_boosts);
            const auto dl1 = ta_l1_loss_backward(y, gt, item_boosts);
            for (std::size_t i = 0; i < dy.size(); ++i)
                dy.data[i] += float(loss_cfg.lambda) * dl1.data[i];
            bundle.g.backward(dy, true);
            opt_g.step(g_params);

            if (!std::isfinite(gan_at_d.d_loss) || !std::isfinite(g_gan) || !std::isfinite(l1))
                throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches) + " (d=" + std::to_string(gan_at_d.d_loss) +
                            ", g=" + std::to_string(g_gan) + ", taL1=" + std::to_string(l1) + ")");

            ep_d += gan_at_d.d_loss;
            ep_g += g_gan;
            ep_l1 += l1;
            batches++;
            bundle.state.global_step++;
        }

        EpochLog log;
        log.epoch = epoch;
        log.phase = phase1 ? 1 : 2;
        log.d_loss = ep_d / std::max(1L, batches);
        log.g_gan = ep_g / std::max(1L, batches);
        log.ta_l1 = ep_l1 / std::max(1L, batches);
        log.total = total_generator_loss(log.g_gan, log.ta_l1, loss_cfg.lambda);
        log.probe_psnr = probe_psnr();
        result.log.push_back(log);
        bundle.state.epochs_completed = epoch + 1;

        if (metrics.is_open()) {
            nlohmann::json j{{"epoch", log.epoch},   {"phase", log.phase},
                             {"d_loss", log.d_loss}, {"g_gan", log.g_gan},
                             {"ta_l1", log.ta_l1},   {"total", log.total},
                             {"probe_psnr", log.probe_psnr}};
            metrics << j.dump() << "\n";
            metrics.flush();
            if (!metrics) throw IoError("failed while appending metrics log");
        }
        if (!sched.run_dir.empty() && sched.checkpoint_every > 0 &&
            (epoch + 1) % sched.checkpoint_every == 0) {
            save_checkpoint(bundle, (std::filesystem::path(sched.run_dir) /
                                     ("ckpt_epoch_" + std::to_string(epoch + 1) + ".ckpt"))
                                        .string());
        }
    }

    if (!sched.run_dir.empty())
        save_checkpoint(bundle,
                        (std::filesystem::path(sched.run_dir) / "ckpt_final.ckpt").string());
    return result;
}

} // namespace pgx
