#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgx/nn.hpp"
#include "pgx/rng.hpp"
#include "pgx/tensor.hpp"

namespace pgx {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

/// Architecture family of the perceptual translation generator: a strided
/// U-Net with a full-resolution stem, plus the embedding mapper MLP fused at
/// the bottleneck. Channel schedule is min(base << i, cap).
struct GeneratorConfig {
    int image_size = 128;
    int levels = 5; // stride-2 stages; bottleneck spatial = image_size >> levels
    int base_channels = 16;
    int max_channels = 256;
    int in_channels = 3;
    int out_channels = 3;
    bool text_conditioning = true; // false realizes the vanilla U-Net baseline
    int text_dim = 512;
    std::vector<int> em_hidden = {1024, 1024};
    std::uint64_t init_seed = 1;

    int ch(int i) const { return std::min(base_channels << i, max_channels); }
    int bottleneck_channels() const { return ch(levels); }
    int bottleneck_hw() const { return image_size >> levels; }
    int bottleneck_flat() const { return bottleneck_channels() * bottleneck_hw() * bottleneck_hw(); }

    void validate() const {
        contract(levels >= 1 && levels <= 10, "levels outside [1,10]");
        contract(base_channels >= 1, "base_channels must be positive");
        contract(image_size % (1 << levels) == 0, "image size not divisible by 2^levels");
        contract(bottleneck_hw() >= 1, "bottleneck collapses to zero");
        if (text_conditioning) {
            contract(text_dim >= 1, "text_dim must be positive");
            for (int wdt : em_hidden) contract(wdt >= 1, "em_hidden widths must be positive");
        }
    }

    nlohmann::json to_json() const {
        return {{"image_size", image_size},
                {"levels", levels},
                {"base_channels", base_channels},
                {"max_channels", max_channels},
                {"in_channels", in_channels},
                {"out_channels", out_channels},
                {"text_conditioning", text_conditioning},
                {"text_dim", text_dim},
                {"em_hidden", em_hidden},
                {"init_seed", init_seed}};
    }

    static GeneratorConfig from_json(const nlohmann::json& j) {
        GeneratorConfig c;
        c.image_size = j.at("image_size").get<int>();
        c.levels = j.at("levels").get<int>();
        c.base_channels = j.at("base_channels").get<int>();
        c.max_channels = j.at("max_channels").get<int>();
        c.in_channels = j.at("in_channels").get<int>();
        c.out_channels = j.at("out_channels").get<int>();
        c.text_conditioning = j.at("text_conditioning").get<bool>();
        c.text_dim = j.at("text_dim").get<int>();
        c.em_hidden = j.at("em_hidden").get<std::vector<int>>();
        c.init_seed = j.at("init_seed").get<std::uint64_t>();
        return c;
    }
};

/// Patch discriminator over (I_X, probe) stacks with the text embedding
/// projected to text_channels and broadcast spatially.
struct DiscriminatorConfig {
    int layers = 4; // stride-2 stages; P spatial = input >> layers
    int base_channels = 16;
    int max_channels = 256;
    int text_channels = 8; // m; 0 disables text conditioning
    int text_dim = 512;
    int image_channels = 3;
    std::uint64_t init_seed = 2;

    int ch(int i) const { return std::min(base_channels << i, max_channels); }
    int stack_channels() const { return 2 * image_channels + text_channels; }

    void validate() const {
        contract(layers >= 1 && layers <= 8, "layers outside [1,8]");
        contract(base_channels >= 1, "base_channels must be positive");
        contract(text_channels >= 0, "text_channels must be >= 0");
    }

    nlohmann::json to_json() const {
        return {{"layers", layers},
                {"base_channels", base_channels},
                {"max_channels", max_channels},
                {"text_channels", text_channels},
                {"text_dim", text_dim},
                {"image_channels", image_channels},
                {"init_seed", init_seed}};
    }

    static DiscriminatorConfig from_json(const nlohmann::json& j) {
        DiscriminatorConfig c;
        c.layers = j.at("layers").get<int>();
        c.base_channels = j.at("base_channels").get<int>();
        c.max_channels = j.at("max_channels").get<int>();
        c.text_channels = j.at("text_channels").get<int>();
        c.text_dim = j.at("text_dim").get<int>();
        c.image_channels = j.at("image_channels").get<int>();
        c.init_seed = j.at("init_seed").get<std::uint64_t>();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Config-derived parameter counts (no instantiation needed)

inline std::size_t em_param_count(const GeneratorConfig& c) {
    if (!c.text_conditioning) return 0;
    std::vector<int> widths;
    widths.push_back(c.text_dim + c.bottleneck_flat());
    for (int wdt : c.em_hidden) widths.push_back(wdt);
    widths.push_back(c.bottleneck_flat());
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
        n += std::size_t(widths[i]) * widths[i + 1] + widths[i + 1];
    return n;
}

inline std::size_t unet_param_count(const GeneratorConfig& c) {
    std::size_t n = 0;
    // stem conv 3x3 (no norm)
    n += std::size_t(c.in_channels) * c.ch(0) * 9 + c.ch(0);
    // downs with instance norm everywhere but the bottleneck
    for (int i = 1; i <= c.levels; ++i) {
        n += std::size_t(c.ch(i - 1)) * c.ch(i) * 16 + c.ch(i);
        if (i < c.levels) n += 2 * std::size_t(c.ch(i));
    }
    // ups with instance norm; inputs double after the first because of skips
    for (int i = c.levels; i >= 1; --i) {
        const int cin = (i == c.levels) ? c.ch(c.levels) : 2 * c.ch(i);
        n += std::size_t(cin) * c.ch(i - 1) * 16 + c.ch(i - 1);
        n += 2 * std::size_t(c.ch(i - 1));
    }
    // final 3x3 conv over [up output | stem skip]
    n += std::size_t(2 * c.ch(0)) * c.out_channels * 9 + c.out_channels;
    return n;
}

inline std::size_t generator_param_count(const GeneratorConfig& c) {
    return unet_param_count(c) + em_param_count(c);
}

inline std::size_t discriminator_param_count(const DiscriminatorConfig& c) {
    std::size_t n = 0;
    if (c.text_channels > 0)
        n += std::size_t(c.text_dim) * c.text_channels + c.text_channels;
    int cin = c.stack_channels();
    for (int i = 0; i < c.layers; ++i) {
        const int cout = c.ch(i);
        n += std::size_t(cin) * cout * 16 + cout;
        if (i > 0) n += 2 * std::size_t(cout); // norm on all but the first
        cin = cout;
    }
    n += std::size_t(cin) * 9 + 1; // final 3x3 conv to one channel
    return n;
}

// ---------------------------------------------------------------------------

/// Perceptual translation generator G. forward() consumes signed [-1,1]
/// image tensors and the text embedding E_T, and bounds outputs to [-1,1].
template <class T>
class Generator {
public:
    Generator() = default;
    explicit Generator(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build();
        init_weights();
    }

    const GeneratorConfig& config() const { return cfg_; }

    void init_weights() {
        Rng rng(mix_seed(cfg_.init_seed, fnv1a64("generator")));
        stem_.init(rng);
        for (auto& l : downs_) l.init(rng);
        for (auto& n : down_norms_) n.init(rng);
        for (auto& l : em_) l.init(rng);
        for (auto& l : ups_) l.init(rng);
        for (auto& n : up_norms_) n.init(rng);
        final_.init(rng);
    }

    /// Runs only the embedding mapper: flattens E_I, concatenates E_T in
    /// front, applies the MLP, reshapes to the bottleneck.
    Tensor<T> map_embeddings(const Tensor<T>& et, const Tensor<T>& ei) {
        contract(cfg_.text_conditioning, "embedding mapper disabled in baseline mode");
        const int N = ei.dim(0);
        contract(et.dim(0) == N && et.dim(1) == cfg_.text_dim, "E_T shape mismatch");
        contract(ei.dim(1) == cfg_.bottleneck_channels() && ei.dim(2) == cfg_.bottleneck_hw() &&
                     ei.dim(3) == cfg_.bottleneck_hw(),
                 "E_I shape mismatch");
        const int flat = cfg_.bottleneck_flat();
        Tensor<T> cat({N, cfg_.text_dim + flat});
        for (int n = 0; n < N; ++n) {
            std::copy_n(et.ptr() + std::size_t(n) * cfg_.text_dim, cfg_.text_dim,
                        cat.ptr() + std::size_t(n) * (cfg_.text_dim + flat));
            std::copy_n(ei.ptr() + std::size_t(n) * flat, flat,
                        cat.ptr() + std::size_t(n) * (cfg_.text_dim + flat) + cfg_.text_dim);
        }
        Tensor<T> h = cat;
        for (std::size_t i = 0; i < em_.size(); ++i) {
            h = em_[i].forward(h);
            if (i + 1 < em_.size()) h = em_acts_[i].forward(h);
        }
        h.reshape({N, cfg_.bottleneck_channels(), cfg_.bottleneck_hw(), cfg_.bottleneck_hw()});
        return h;
    }

    /// Backward through the mapper alone; returns (dE_T, dE_I).
    std::pair<Tensor<T>, Tensor<T>> map_embeddings_backward(const Tensor<T>& dec,
                                                            bool param_grads = true) {
        Tensor<T> dh = dec;
        const int N = dh.dim(0);
        const int flat = cfg_.bottleneck_flat();
        dh.reshape({N, flat});
        for (int i = int(em_.size()) - 1; i >= 0; --i) {
            if (i + 1 < int(em_.size())) dh = em_acts_[i].backward(dh);
            dh = em_[i].backward(dh, param_grads);
        }
        Tensor<T> det({N, cfg_.text_dim});
        Tensor<T> dei({N, cfg_.bottleneck_channels(), cfg_.bottleneck_hw(), cfg_.bottleneck_hw()});
        for (int n = 0; n < N; ++n) {
            std::copy_n(dh.ptr() + std::size_t(n) * (cfg_.text_dim + flat), cfg_.text_dim,
                        det.ptr() + std::size_t(n) * cfg_.text_dim);
            std::copy_n(dh.ptr() + std::size_t(n) * (cfg_.text_dim + flat) + cfg_.text_dim, flat,
                        dei.ptr() + std::size_t(n) * flat);
        }
        return {det, dei};
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& et) {
        const int N = x.dim(0), S = x.dim(2);
        contract(x.dim(1) == cfg_.in_channels, "input channel mismatch");
        contract(x.dim(2) == x.dim(3), "inputs must be square");
        if (cfg_.text_conditioning) {
            contract(S == cfg_.image_size,
                     "conditioned generator is bound to its configured image size");
            contract(et.dim(0) == N && et.dim(1) == cfg_.text_dim, "E_T shape mismatch");
        } else {
            contract(S % (1 << cfg_.levels) == 0, "input size not divisible by 2^levels");
        }

        Tensor<T> h = stem_act_.forward(stem_.forward(x));
        skips_.assign(std::size_t(cfg_.levels), Tensor<T>());
        for (int i = 1; i <= cfg_.levels; ++i) {
            if (i == 1) skips_[0] = h;
            h = downs_[i - 1].forward(h);
            if (i < cfg_.levels) h = down_norms_[i - 1].forward(h); // no norm at bottleneck
            h = down_acts_[i - 1].forward(h);
            if (i < cfg_.levels) skips_[i] = h;
        }
        // h is E_I at the bottleneck
        if (cfg_.text_conditioning) h = map_embeddings(et, h);

        for (int i = cfg_.levels; i >= 1; --i) {
            const int u = cfg_.levels - i; // decoder stage index
            h = up_acts_[u].forward(up_norms_[u].forward(ups_[u].forward(h)));
            h = nn::concat_channels(h, skips_[i - 1]);
        }
        return final_act_.forward(final_.forward(h));
    }

    /// Backward for the last forward() batch; accumulates parameter grads and
    /// returns the gradient w.r.t. the input image tensor.
    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        Tensor<T> dh = final_.backward(final_act_.backward(dy), param_grads);

        std::vector<Tensor<T>> skip_grads(std::size_t(cfg_.levels));
        for (int i = 1; i <= cfg_.levels; ++i) {
            const int u = cfg_.levels - i;
            Tensor<T> d_up, d_skip;
            nn::split_channels(dh, cfg_.ch(i - 1), d_up, d_skip);
            skip_grads[i - 1] = std::move(d_skip);
            dh = ups_[u].backward(
                up_norms_[u].backward(up_acts_[u].backward(d_up), param_grads), param_grads);
        }

        if (cfg_.text_conditioning) dh = map_embeddings_backward(dh, param_grads).second;

        for (int i = cfg_.levels; i >= 1; --i) {
            if (i < cfg_.levels)
                for (std::size_t j = 0; j < dh.size(); ++j)
                    dh.data[j] += skip_grads[i].data[j];
            dh = down_acts_[i - 1].backward(dh);
            if (i < cfg_.levels) dh = down_norms_[i - 1].backward(dh, param_grads);
            dh = downs_[i - 1].backward(dh, param_grads);
        }
        for (std::size_t j = 0; j < dh.size(); ++j) dh.data[j] += skip_grads[0].data[j];
        return stem_.backward(stem_act_.backward(dh), param_grads);
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        stem_.collect(out);
        for (auto& l : downs_) l.collect(out);
        for (auto& n : down_norms_) n.collect(out);
        for (auto& l : em_) l.collect(out);
        for (auto& l : ups_) l.collect(out);
        for (auto& n : up_norms_) n.collect(out);
        final_.collect(out);
        return out;
    }

    std::vector<Param<T>*> em_params() {
        std::vector<Param<T>*> out;
        for (auto& l : em_) l.collect(out);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto* p : params()) n += p->value.size();
        return n;
    }

private:
    void build() {
        stem_ = nn::Conv2d<T>("g.stem", cfg_.in_channels, cfg_.ch(0), 3, 1, 1);
        downs_.clear();
        down_norms_.clear();
        down_acts_.assign(std::size_t(cfg_.levels), nn::LeakyRelu<T>(0.2));
        for (int i = 1; i <= cfg_.levels; ++i) {
            downs_.emplace_back("g.down" + std::to_string(i), cfg_.ch(i - 1), cfg_.ch(i), 4, 2, 1);
            if (i < cfg_.levels)
                down_norms_.emplace_back("g.down" + std::to_string(i) + ".norm", cfg_.ch(i));
        }
        em_.clear();
        em_acts_.clear();
        if (cfg_.text_conditioning) {
            std::vector<int> widths;
            widths.push_back(cfg_.text_dim + cfg_.bottleneck_flat());
            for (int wdt : cfg_.em_hidden) widths.push_back(wdt);
            widths.push_back(cfg_.bottleneck_flat());
            for (std::size_t i = 0; i + 1 < widths.size(); ++i)
                em_.emplace_back("g.em" + std::to_string(i), widths[i], widths[i + 1]);
            em_acts_.assign(em_.size() - 1, nn::Relu<T>());
        }
        ups_.clear();
        up_norms_.clear();
        up_acts_.assign(std::size_t(cfg_.levels), nn::Relu<T>());
        for (int i = cfg_.levels; i >= 1; --i) {
            const int cin = (i == cfg_.levels) ? cfg_.ch(cfg_.levels) : 2 * cfg_.ch(i);
            ups_.emplace_back("g.up" + std::to_string(i), cin, cfg_.ch(i - 1), 4, 2, 1);
            up_norms_.emplace_back("g.up" + std::to_string(i) + ".norm", cfg_.ch(i - 1));
        }
        final_ = nn::Conv2d<T>("g.final", 2 * cfg_.ch(0), cfg_.out_channels, 3, 1, 1);
    }

    GeneratorConfig cfg_;
    nn::Conv2d<T> stem_;
    nn::LeakyRelu<T> stem_act_{0.2};
    std::vector<nn::Conv2d<T>> downs_;
    std::vector<nn::InstanceNorm2d<T>> down_norms_;
    std::vector<nn::LeakyRelu<T>> down_acts_;
    std::vector<nn::Linear<T>> em_;
    std::vector<nn::Relu<T>> em_acts_;
    std::vector<nn::ConvTranspose2d<T>> ups_;
    std::vector<nn::InstanceNorm2d<T>> up_norms_;
    std::vector<nn::Relu<T>> up_acts_;
    nn::Conv2d<T> final_;
    nn::Tanh<T> final_act_;
    std::vector<Tensor<T>> skips_;
};

/// Task-aware patch discriminator D: scores (I_X, probe) stacks conditioned
/// on the projected text embedding; outputs a probability map in (0,1).
template <class T>
class Discriminator {
public:
    Discriminator() = default;
    explicit Discriminator(DiscriminatorConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build();
        init_weights();
    }

    const DiscriminatorConfig& config() const { return cfg_; }

    void init_weights() {
        Rng rng(mix_seed(cfg_.init_seed, fnv1a64("discriminator")));
        if (cfg_.text_channels > 0) proj_.init(rng);
        for (auto& l : convs_) l.init(rng);
        for (auto& n : norms_) n.init(rng);
        final_.init(rng);
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& probe, const Tensor<T>& et) {
        const int N = x.dim(0), S = x.dim(2);
        contract(x.same_shape(probe), "I_X and probe must share a shape");
        contract(S % (1 << cfg_.layers) == 0, "input size not divisible by 2^layers");
        Tensor<T> stack = nn::concat_channels(x, probe);
        if (cfg_.text_channels > 0) {
            contract(et.dim(0) == N && et.dim(1) == cfg_.text_dim, "E_T shape mismatch");
            Tensor<T> proj = proj_.forward(et); // (N, m)
            Tensor<T> bcast({N, cfg_.text_channels, S, S});
            const std::size_t plane = std::size_t(S) * S;
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < cfg_.text_channels; ++c) {
                    T* dst = bcast.ptr() + (std::size_t(n) * cfg_.text_channels + c) * plane;
                    std::fill_n(dst, plane, proj.data[std::size_t(n) * cfg_.text_channels + c]);
                }
            stack = nn::concat_channels(stack, bcast);
        }
        Tensor<T> h = stack;
        for (int i = 0; i < cfg_.layers; ++i) {
            h = convs_[i].forward(h);
            if (i > 0) h = norms_[i - 1].forward(h);
            h = acts_[i].forward(h);
        }
        return out_act_.forward(final_.forward(h));
    }

    /// Backward to the probe image; image grads for I_X are discarded, text
    /// projection grads accumulate when param_grads is set.
    Tensor<T> backward(const Tensor<T>& dp, bool param_grads = true) {
        Tensor<T> dh = final_.backward(out_act_.backward(dp), param_grads);
        for (int i = cfg_.layers - 1; i >= 0; --i) {
            dh = acts_[i].backward(dh);
            if (i > 0) dh = norms_[i - 1].backward(dh, param_grads);
            dh = convs_[i].backward(dh, param_grads);
        }
        const int N = dh.dim(0), S = dh.dim(2);
        Tensor<T> d_images, d_text;
        if (cfg_.text_channels > 0) {
            nn::split_channels(dh, 2 * cfg_.image_channels, d_images, d_text);
            if (param_grads) {
                Tensor<T> dproj({N, cfg_.text_channels});
                const std::size_t plane = std::size_t(S) * S;
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < cfg_.text_channels; ++c) {
                        const T* src =
                            d_text.ptr() + (std::size_t(n) * cfg_.text_channels + c) * plane;
                        T acc = T(0);
                        for (std::size_t i = 0; i < plane; ++i) acc += src[i];
                        dproj.data[std::size_t(n) * cfg_.text_channels + c] = acc;
                    }
                proj_.backward(dproj, true);
            }
        } else {
            d_images = dh;
        }
        Tensor<T> dx, dprobe;
        nn::split_channels(d_images, cfg_.image_channels, dx, dprobe);
        return dprobe;
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        if (cfg_.text_channels > 0) proj_.collect(out);
        for (auto& l : convs_) l.collect(out);
        for (auto& n : norms_) n.collect(out);
        final_.collect(out);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto* p : params()) n += p->value.size();
        return n;
    }

private:
    void build() {
        if (cfg_.text_channels > 0)
            proj_ = nn::Linear<T>("d.proj", cfg_.text_dim, cfg_.text_channels);
        convs_.clear();
        norms_.clear();
        acts_.assign(std::size_t(cfg_.layers), nn::LeakyRelu<T>(0.2));
        int cin = cfg_.stack_channels();
        for (int i = 0; i < cfg_.layers; ++i) {
            const int cout = cfg_.ch(i);
            convs_.emplace_back("d.conv" + std::to_string(i), cin, cout, 4, 2, 1);
            if (i > 0) norms_.emplace_back("d.conv" + std::to_string(i) + ".norm", cout);
            cin = cout;
        }
        final_ = nn::Conv2d<T>("d.final", cin, 1, 3, 1, 1);
    }

    DiscriminatorConfig cfg_;
    nn::Linear<T> proj_;
    std::vector<nn::Conv2d<T>> convs_;
    std::vector<nn::InstanceNorm2d<T>> norms_;
    std::vector<nn::LeakyRelu<T>> acts_;
    nn::Conv2d<T> final_;
    nn::Sigmoid<T> out_act_;
};

// ---------------------------------------------------------------------------
// Bundle + checkpoint container

struct TrainingState {
    int epochs_completed = 0;
    long global_step = 0;

    nlohmann::json to_json() const {
        return {{"epochs_completed", epochs_completed}, {"global_step", global_step}};
    }
    static TrainingState from_json(const nlohmann::json& j) {
        TrainingState s;
        s.epochs_completed = j.value("epochs_completed", 0);
        s.global_step = j.value("global_step", 0L);
        return s;
    }
};

struct ModelBundle {
    GeneratorConfig gcfg;
    DiscriminatorConfig dcfg;
    std::string provider_id = "token-hash-v1";
    TrainingState state;
    Generator<float> g;
    Discriminator<float> d;

    ModelBundle() = default;
    ModelBundle(GeneratorConfig gc, DiscriminatorConfig dc, std::string provider)
        : gcfg(std::move(gc)), dcfg(std::move(dc)), provider_id(std::move(provider)),
          g(gcfg), d(dcfg) {}
};

constexpr int kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_tensors(std::ofstream& out, const std::vector<Param<T>*>& params) {
    for (const Param<T>* p : params) {
        const std::uint16_t name_len = std::uint16_t(p->name.size());
        out.write(reinterpret_cast<const char*>(&name_len), 2);
        out.write(p->name.data(), name_len);
        const std::uint8_t rank = std::uint8_t(p->value.shape.size());
        out.write(reinterpret_cast<const char*>(&rank), 1);
        for (int d : p->value.shape) {
            const std::uint32_t dim = std::uint32_t(d);
            out.write(reinterpret_cast<const char*>(&dim), 4);
        }
        std::vector<float> vals(p->value.data.begin(), p->value.data.end());
        out.write(reinterpret_cast<const char*>(vals.data()), std::streamsize(vals.size() * 4));
    }
}

template <class T>
void read_tensors(std::ifstream& in, const std::vector<Param<T>*>& params,
                  const std::string& path) {
    std::map<std::string, Param<T>*> by_name;
    for (Param<T>* p : params) by_name[p->name] = p;
    std::size_t loaded = 0;
    while (loaded < params.size()) {
        std::uint16_t name_len = 0;
        if (!in.read(reinterpret_cast<char*>(&name_len), 2))
            throw IoError("checkpoint truncated: " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::uint8_t rank = 0;
        in.read(reinterpret_cast<char*>(&rank), 1);
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            std::uint32_t dim = 0;
            in.read(reinterpret_cast<char*>(&dim), 4);
            d = int(dim);
        }
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw IoError("unexpected tensor '" + name + "' in " + path);
        Param<T>* p = it->second;
        if (p->value.shape != shape)
            throw IoError("tensor shape mismatch for '" + name + "' in " + path);
        std::vector<float> vals(p->value.size());
        if (!in.read(reinterpret_cast<char*>(vals.data()), std::streamsize(vals.size() * 4)))
            throw IoError("checkpoint truncated in tensor '" + name + "': " + path);
        for (std::size_t i = 0; i < vals.size(); ++i) p->value.data[i] = T(vals[i]);
        loaded++;
    }
}

inline nlohmann::json read_checkpoint_header(std::ifstream& in, const std::string& path,
                                             const std::string& expected_kind) {
    std::uint32_t header_len = 0;
    if (!in.read(reinterpret_cast<char*>(&header_len), 4))
        throw IoError("not a checkpoint file: " + path);
    std::string header(header_len, '\0');
    if (!in.read(header.data(), header_len))
        throw IoError("checkpoint header truncated: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::parse_error&) {
        throw IoError("checkpoint header is not valid JSON: " + path);
    }
    const int version = j.value("format_version", -1);
    if (version != kCheckpointVersion)
        throw VersionError("checkpoint " + path + " has format_version " +
                           std::to_string(version) + ", this build reads " +
                           std::to_string(kCheckpointVersion));
    if (j.value("kind", "") != expected_kind)
        throw IoError("checkpoint " + path + " holds a '" + j.value("kind", "?") +
                      "', expected '" + expected_kind + "'");
    return j;
}

inline void write_checkpoint_header(std::ofstream& out, const nlohmann::json& j) {
    const std::string header = j.dump();
    const std::uint32_t header_len = std::uint32_t(header.size());
    out.write(reinterpret_cast<const char*>(&header_len), 4);
    out.write(header.data(), std::streamsize(header.size()));
}

} // namespace detail

/// Single binary file: u32 header length, JSON header (configs, provider,
/// training state), then named float32 tensors. Bit-exact round trip.
inline void save_checkpoint(ModelBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    nlohmann::json header{{"format_version", kCheckpointVersion},
                          {"kind", "model-bundle"},
                          {"generator", bundle.gcfg.to_json()},
                          {"discriminator", bundle.dcfg.to_json()},
                          {"provider_id", bundle.provider_id},
                          {"training", bundle.state.to_json()}};
    detail::write_checkpoint_header(out, header);
    detail::write_tensors(out, bundle.g.params());
    detail::write_tensors(out, bundle.d.params());
    if (!out) throw IoError("failed while writing checkpoint: " + path);
}

inline ModelBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    const auto header = detail::read_checkpoint_header(in, path, "model-bundle");
    ModelBundle bundle(GeneratorConfig::from_json(header.at("generator")),
                       DiscriminatorConfig::from_json(header.at("discriminator")),
                       header.value("provider_id", "token-hash-v1"));
    bundle.state = TrainingState::from_json(header.value("training", nlohmann::json::object()));
    detail::read_tensors(in, bundle.g.params(), path);
    detail::read_tensors(in, bundle.d.params(), path);
    return bundle;
}

} // namespace pgx
