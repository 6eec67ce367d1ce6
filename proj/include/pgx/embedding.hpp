#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "pgx/errors.hpp"
#include "pgx/prompts.hpp"
#include "pgx/rng.hpp"

namespace pgx {

/// Text embedding E_T produced by a provider. Fixed dimensionality per model
/// bundle (default 512).
struct TextEmbedding {
    std::vector<float> vec;
    std::string provider_id;

    int dim() const { return int(vec.size()); }
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual TextEmbedding embed(const std::string& text) const = 0;
    virtual int dim() const = 0;
    virtual std::string id() const = 0;
};

/// Weight-free provider: each whitespace token maps to a Gaussian vector
/// seeded by the token's hash; token vectors are averaged and L2-normalized.
/// Deterministic across platforms, needs no network or weights.
class TokenHashEncoder final : public TextEncoder {
public:
    explicit TokenHashEncoder(int dim = 512) : dim_(dim) {
        contract(dim > 0, "embedding dimension must be positive");
    }

    TextEmbedding embed(const std::string& text) const override {
        const auto tokens = detail::tokenize_lower(text);
        if (tokens.empty()) throw ParseError("empty prompt");
        std::vector<double> acc(dim_, 0.0);
        for (const auto& tok : tokens) {
            Rng rng(fnv1a64(tok));
            for (int i = 0; i < dim_; ++i) acc[i] += rng.normal();
        }
        double norm_sq = 0.0;
        for (double& v : acc) {
            v /= double(tokens.size());
            norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        TextEmbedding out;
        out.provider_id = id();
        out.vec.resize(dim_);
        for (int i = 0; i < dim_; ++i) out.vec[i] = float(norm > 0.0 ? acc[i] / norm : 0.0);
        return out;
    }

    int dim() const override { return dim_; }
    std::string id() const override { return "token-hash-v1"; }

private:
    int dim_;
};

/// Provider registry. A pretrained contrastive encoder can be added under its
/// own name; requesting an unregistered provider is an explicit error, never
/// a silent fallback.
inline std::unique_ptr<TextEncoder> make_text_encoder(const std::string& name, int dim = 512) {
    if (name == "token-hash-v1" || name == "token-hash") {
        return std::make_unique<TokenHashEncoder>(dim);
    }
    throw Error("text embedding provider unavailable: '" + name +
                "' (available: token-hash-v1)");
}

inline double cosine_similarity(const TextEmbedding& a, const TextEmbedding& b) {
    contract(a.dim() == b.dim(), "embedding dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        dot += double(a.vec[i]) * b.vec[i];
        na += double(a.vec[i]) * a.vec[i];
        nb += double(b.vec[i]) * b.vec[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace pgx
