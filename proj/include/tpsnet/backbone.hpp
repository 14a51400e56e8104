#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "tpsnet/ad.hpp"
#include "tpsnet/dataset.hpp"
#include "tpsnet/params.hpp"

namespace tpsnet {

// Fixed prompt prefix plus M learnable slots per (domain, category).
struct PromptTemplate {
    std::vector<int> prefix_token_ids;  // token ids for "An image of a"
    int num_learnable = 4;              // M
};

// Pluggable image/text encoder pair. Every embedding leaving this
// interface is L2-normalized, so cosine similarity is a dot product
// downstream.
class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;
    virtual int embed_dim() const = 0;
    virtual int token_dim() const = 0;
    // 1 x d, unit norm; differentiable into the image_last_block group.
    virtual ad::Var encode_image(const Image& pixels) = 0;
    // Token-embedding sequence (each 1 x d_token) -> 1 x d, unit norm.
    virtual ad::Var encode_text(const std::vector<ad::Var>& token_embs) = 0;
    virtual ad::Var token_embed(int token_id) = 0;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

protected:
    explicit EncoderBackend(ParamStore& store) : params_(store) {}
    ParamStore& params_;
};

// Per-domain, per-category learnable prompt token embeddings. Tokens
// for (domain, category) live in one M x d_token parameter each.
class DomainPromptBank {
public:
    DomainPromptBank(ParamStore& store, int num_categories, int num_tokens,
                     int token_dim, std::uint64_t seed);
    ad::Var tokens(int domain, int category) const;
    int num_categories() const { return num_categories_; }
    int num_tokens() const { return num_tokens_; }
    static std::string param_name(int domain, int category);

private:
    ParamStore& store_;
    int num_categories_;
    int num_tokens_;
};

// Encodes the template prefix plus the learnable tokens of one
// (domain, category) prompt into a unit-norm d-vector.
ad::Var encode_prompt(const DomainPromptBank& bank, const PromptTemplate& tmpl,
                      int domain, int category, EncoderBackend& backend);

// Deterministic desk-scale backend: flatten -> linear -> tanh -> linear
// (the final linear is the trainable "last block"); text path is
// mean-of-tokens -> linear.
std::unique_ptr<EncoderBackend> make_toy_backend(ParamStore& store, std::uint64_t seed,
                                                 int embed_dim, int token_dim,
                                                 int image_size);

// Vocabulary of the fixed toy tokenizer; "an image of a" occupies the
// first four ids.
PromptTemplate default_prompt_template(int num_learnable = 4);

}  // namespace tpsnet
