#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pgx/dataset.hpp"
#include "pgx/metrics.hpp"
#include "pgx/model.hpp"
#include "pgx/tensor_image.hpp"

namespace pgx {

/// Convolutional autoencoder used for latent streaming: a locally trained
/// stand-in with the same architectural role as a distilled pretrained
/// encoder/decoder pair.
struct CodecConfig {
    int image_size = 128;
    int downscale_levels = 3; // latent spatial = image_size >> levels
    int latent_channels = 16;
    int base_channels = 24;
    std::uint64_t init_seed = 3;

    int latent_hw() const { return image_size >> downscale_levels; }
    int ch(int i) const { return base_channels << i; }

    double compression_ratio() const {
        return 3.0 * image_size * image_size /
               (double(latent_channels) * latent_hw() * latent_hw());
    }

    void validate() const {
        contract(downscale_levels >= 1 && downscale_levels <= 6, "downscale outside [1,6]");
        contract(image_size % (1 << downscale_levels) == 0,
                 "image size not divisible by the downscale factor");
        contract(latent_channels >= 1 && base_channels >= 1, "channel counts must be positive");
        contract(compression_ratio() > 1.0, "codec must compress");
    }

    nlohmann::json to_json() const {
        return {{"image_size", image_size},
                {"downscale_levels", downscale_levels},
                {"latent_channels", latent_channels},
                {"base_channels", base_channels},
                {"init_seed", init_seed}};
    }
    static CodecConfig from_json(const nlohmann::json& j) {
        CodecConfig c;
        c.image_size = j.at("image_size").get<int>();
        c.downscale_levels = j.at("downscale_levels").get<int>();
        c.latent_channels = j.at("latent_channels").get<int>();
        c.base_channels = j.at("base_channels").get<int>();
        c.init_seed = j.at("init_seed").get<std::uint64_t>();
        return c;
    }
};

template <class T>
class Autoencoder {
public:
    Autoencoder() = default;
    explicit Autoencoder(CodecConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build();
        init_weights();
    }

    const CodecConfig& config() const { return cfg_; }

    void init_weights() {
        Rng rng(mix_seed(cfg_.init_seed, fnv1a64("codec")));
        enc_in_.init(rng);
        for (auto& l : enc_downs_) l.init(rng);
        for (auto& n : enc_norms_) n.init(rng);
        enc_out_.init(rng);
        dec_in_.init(rng);
        for (auto& l : dec_ups_) l.init(rng);
        for (auto& n : dec_norms_) n.init(rng);
        dec_out_.init(rng);
    }

    Tensor<T> encode(const Tensor<T>& x) {
        contract(x.dim(2) == cfg_.image_size && x.dim(3) == cfg_.image_size,
                 "codec is bound to its configured image size");
        Tensor<T> h = enc_act0_.forward(enc_in_.forward(x));
        for (int i = 0; i < cfg_.downscale_levels; ++i)
            h = enc_acts_[i].forward(enc_norms_[i].forward(enc_downs_[i].forward(h)));
        return enc_out_.forward(h);
    }

    Tensor<T> decode(const Tensor<T>& z) {
        Tensor<T> h = dec_act0_.forward(dec_in_.forward(z));
        for (int i = 0; i < cfg_.downscale_levels; ++i)
            h = dec_acts_[i].forward(dec_norms_[i].forward(dec_ups_[i].forward(h)));
        return dec_act_out_.forward(dec_out_.forward(h));
    }

    /// Backward through decode then encode (for reconstruction training).
    void backward(const Tensor<T>& dy) {
        Tensor<T> dh = dec_out_.backward(dec_act_out_.backward(dy));
        for (int i = cfg_.downscale_levels - 1; i >= 0; --i)
            dh = dec_ups_[i].backward(
                dec_norms_[i].backward(dec_acts_[i].backward(dh)));
        dh = dec_in_.backward(dec_act0_.backward(dh));
        dh = enc_out_.backward(dh);
        for (int i = cfg_.downscale_levels - 1; i >= 0; --i)
            dh = enc_downs_[i].backward(
                enc_norms_[i].backward(enc_acts_[i].backward(dh)));
        enc_in_.backward(enc_act0_.backward(dh));
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        enc_in_.collect(out);
        for (auto& l : enc_downs_) l.collect(out);
        for (auto& n : enc_norms_) n.collect(out);
        enc_out_.collect(out);
        dec_in_.collect(out);
        for (auto& l : dec_ups_) l.collect(out);
        for (auto& n : dec_norms_) n.collect(out);
        dec_out_.collect(out);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto* p : params()) n += p->value.size();
        return n;
    }

private:
    void build() {
        const int L = cfg_.downscale_levels;
        enc_in_ = nn::Conv2d<T>("c.enc_in", 3, cfg_.ch(0), 3, 1, 1);
        enc_downs_.clear();
        enc_norms_.clear();
        enc_acts_.assign(std::size_t(L), nn::LeakyRelu<T>(0.2));
        for (int i = 0; i < L; ++i) {
            enc_downs_.emplace_back("c.enc_down" + std::to_string(i), cfg_.ch(i), cfg_.ch(i + 1),
                                    4, 2, 1);
            enc_norms_.emplace_back("c.enc_down" + std::to_string(i) + ".norm", cfg_.ch(i + 1));
        }
        enc_out_ = nn::Conv2d<T>("c.enc_out", cfg_.ch(L), cfg_.latent_channels, 3, 1, 1);
        dec_in_ = nn::Conv2d<T>("c.dec_in", cfg_.latent_channels, cfg_.ch(L), 3, 1, 1);
        dec_ups_.clear();
        dec_norms_.clear();
        dec_acts_.assign(std::size_t(L), nn::Relu<T>());
        for (int i = 0; i < L; ++i) {
            dec_ups_.emplace_back("c.dec_up" + std::to_string(i), cfg_.ch(L - i),
                                  cfg_.ch(L - i - 1), 4, 2, 1);
            dec_norms_.emplace_back("c.dec_up" + std::to_string(i) + ".norm", cfg_.ch(L - i - 1));
        }
        dec_out_ = nn::Conv2d<T>("c.dec_out", cfg_.ch(0), 3, 3, 1, 1);
    }

    CodecConfig cfg_;
    nn::Conv2d<T> enc_in_;
    nn::LeakyRelu<T> enc_act0_{0.2};
    std::vector<nn::Conv2d<T>> enc_downs_;
    std::vector<nn::InstanceNorm2d<T>> enc_norms_;
    std::vector<nn::LeakyRelu<T>> enc_acts_;
    nn::Conv2d<T> enc_out_;
    nn::Conv2d<T> dec_in_;
    nn::LeakyRelu<T> dec_act0_{0.2};
    std::vector<nn::ConvTranspose2d<T>> dec_ups_;
    std::vector<nn::InstanceNorm2d<T>> dec_norms_;
    std::vector<nn::Relu<T>> dec_acts_;
    nn::Conv2d<T> dec_out_;
    nn::Tanh<T> dec_act_out_;
};

struct LatentCodec {
    CodecConfig cfg;
    Autoencoder<float> ae;

    LatentCodec() = default;
    explicit LatentCodec(CodecConfig c) : cfg(std::move(c)), ae(cfg) {}
};

/// Encode a u8 image to a latent tensor (c, h, w).
inline Tensor<float> codec_encode(LatentCodec& codec, const Image& img) {
    const auto chw = image_to_signed_chw(img);
    Tensor<float> x({1, 3, img.height, img.width});
    std::copy(chw.data.begin(), chw.data.end(), x.data.begin());
    auto z = codec.ae.encode(x);
    z.reshape({z.dim(1), z.dim(2), z.dim(3)});
    return z;
}

/// Decode a latent tensor (c, h, w) back to a u8 image.
inline Image codec_decode(LatentCodec& codec, const Tensor<float>& latent) {
    contract(latent.shape.size() == 3, "latent must be rank 3");
    Tensor<float> z({1, latent.dim(0), latent.dim(1), latent.dim(2)});
    std::copy(latent.data.begin(), latent.data.end(), z.data.begin());
    return signed_chw_to_image(codec.ae.decode(z));
}

struct CodecTrainResult {
    LatentCodec codec;
    std::vector<double> epoch_l2; // mean squared reconstruction error per epoch
};

/// Trains the autoencoder on the manifest's target images with an L2
/// reconstruction objective.
inline CodecTrainResult train_codec(const DatasetManifest& manifest, const CodecConfig& cfg,
                                    int epochs, double lr, std::uint64_t seed,
                                    int batch_size = 8, const std::string& split = "train") {
    cfg.validate();
    contract(epochs >= 1, "epochs must be >= 1");
    std::vector<Tensor<float>> images;
    for (const auto& r : manifest.records) {
        if (r.split != split) continue;
        const auto img = read_png_rgb8(manifest.resolve(r.target_path));
        contract(img.width == cfg.image_size && img.height == cfg.image_size,
                 "target image size does not match codec config");
        images.push_back(image_to_signed_chw(img));
    }
    contract(!images.empty(), "no images to train the codec on");

    CodecTrainResult result{LatentCodec(cfg), {}};
    auto params = result.codec.ae.params();
    nn::Adam<float> opt(lr, 0.9, 0.999);
    const int S = cfg.image_size;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order(images.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(mix_seed(seed, fnv1a64("codec-epoch") + epoch));
        rng.shuffle(order);

        double ep_loss = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const int nb = int(std::min<std::size_t>(batch_size, order.size() - start));
            Tensor<float> x({nb, 3, S, S});
            for (int b = 0; b < nb; ++b)
                std::copy(images[order[start + b]].data.begin(),
                          images[order[start + b]].data.end(),
                          x.data.begin() + std::size_t(b) * images[0].size());
            opt.zero_grad(params);
            const auto z = result.codec.ae.encode(x);
            const auto y = result.codec.ae.decode(z);
            double loss = 0.0;
            Tensor<float> dy = y;
            const double inv = 1.0 / double(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double d = double(y.data[i]) - double(x.data[i]);
                loss += d * d;
                dy.data[i] = float(2.0 * d * inv);
            }
            loss *= inv;
            if (!std::isfinite(loss))
                throw Error("non-finite codec loss at epoch " + std::to_string(epoch));
            result.codec.ae.backward(dy);
            opt.step(params);
            ep_loss += loss;
            batches++;
        }
        result.epoch_l2.push_back(ep_loss / std::max(1L, batches));
    }
    return result;
}

/// Mean round-trip PSNR over a split (the codec quality floor check).
inline double codec_round_trip_psnr(LatentCodec& codec, const DatasetManifest& manifest,
                                    const std::string& split = "test") {
    double acc = 0.0;
    long n = 0;
    for (const auto& r : manifest.records) {
        if (r.split != split) continue;
        const auto img = read_png_rgb8(manifest.resolve(r.target_path));
        const auto back = codec_decode(codec, codec_encode(codec, img));
        const double v = psnr(img, back);
        acc += std::isinf(v) ? 99.0 : v;
        n++;
    }
    contract(n > 0, "no images in split '" + split + "'");
    return acc / double(n);
}

inline void save_codec(LatentCodec& codec, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write codec checkpoint: " + path);
    nlohmann::json header{{"format_version", kCheckpointVersion},
                          {"kind", "codec"},
                          {"codec", codec.cfg.to_json()}};
    detail::write_checkpoint_header(out, header);
    detail::write_tensors(out, codec.ae.params());
    if (!out) throw IoError("failed while writing codec checkpoint: " + path);
}

inline LatentCodec load_codec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read codec checkpoint: " + path);
    const auto header = detail::read_checkpoint_header(in, path, "codec");
    LatentCodec codec(CodecConfig::from_json(header.at("codec")));
    detail::read_tensors(in, codec.ae.params(), path);
    return codec;
}

} // namespace pgx
