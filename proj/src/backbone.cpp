#include "tpsnet/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "tpsnet/rng.hpp"

namespace tpsnet {

DomainPromptBank::DomainPromptBank(ParamStore& store, int num_categories,
                                   int num_tokens, int token_dim, std::uint64_t seed)
    : store_(store), num_categories_(num_categories), num_tokens_(num_tokens) {
    if (num_categories < 1 || num_tokens < 1)
        throw std::invalid_argument("DomainPromptBank: C and M must be positive");
    auto rng = make_rng(mix_seed(seed, 0x9047ULL));
    for (int d = 0; d < 2; ++d)
        for (int c = 0; c < num_categories; ++c)
            store.add(param_name(d, c), random_normal(rng, num_tokens, token_dim, 0.02));
}

std::string DomainPromptBank::param_name(int domain, int category) {
    return "prompt_tokens/d" + std::to_string(domain) + "/c" + std::to_string(category);
}

ad::Var DomainPromptBank::tokens(int domain, int category) const {
    if (domain < 0 || domain > 1 || category < 0 || category >= num_categories_)
        throw std::out_of_range("DomainPromptBank: domain or category out of range");
    return store_.get(param_name(domain, category));
}

ad::Var encode_prompt(const DomainPromptBank& bank, const PromptTemplate& tmpl,
                      int domain, int category, EncoderBackend& backend) {
    std::vector<ad::Var> seq;
    seq.reserve(tmpl.prefix_token_ids.size() + 1);
    for (int id : tmpl.prefix_token_ids) seq.push_back(backend.token_embed(id));
    ad::Var learnable = bank.tokens(domain, category);
    for (int m = 0; m < bank.num_tokens(); ++m)
        seq.push_back(ad::gather_rows(learnable, {m}));
    return backend.encode_text(seq);
}

PromptTemplate default_prompt_template(int num_learnable) {
    PromptTemplate t;
    t.prefix_token_ids = {0, 1, 2, 3};  // "an", "image", "of", "a"
    t.num_learnable = num_learnable;
    return t;
}

namespace {

constexpr int kToyVocabSize = 8;
constexpr int kToyHidden = 128;

class ToyBackend final : public EncoderBackend {
public:
    ToyBackend(ParamStore& store, std::uint64_t seed, int embed_dim, int token_dim,
               int image_size)
        : EncoderBackend(store), embed_dim_(embed_dim), token_dim_(token_dim),
          image_size_(image_size) {
        if (embed_dim < 8) throw std::invalid_argument("toy backend: d must be >= 8");
        auto rng = make_rng(mix_seed(seed, 0x70bdULL));
        int in_dim = 3 * image_size * image_size;
        params_.add("image_encoder/stem/w",
                    random_normal(rng, in_dim, kToyHidden, std::sqrt(1.0 / in_dim)));
        params_.add("image_encoder/stem/b", Eigen::MatrixXd::Zero(1, kToyHidden));
        params_.add("image_encoder/last_block/w",
                    random_normal(rng, kToyHidden, embed_dim, std::sqrt(1.0 / kToyHidden)));
        params_.add("image_encoder/last_block/b", Eigen::MatrixXd::Zero(1, embed_dim));
        params_.add("text_encoder/proj/w",
                    random_normal(rng, token_dim, embed_dim, std::sqrt(1.0 / token_dim)));
        params_.add("text_encoder/proj/b", Eigen::MatrixXd::Zero(1, embed_dim));
        params_.add("token_embed/table",
                    random_normal(rng, kToyVocabSize, token_dim, 0.5));
    }

    int embed_dim() const override { return embed_dim_; }
    int token_dim() const override { return token_dim_; }

    ad::Var encode_image(const Image& pixels) override {
        if (!pixels.r.allFinite() || !pixels.g.allFinite() || !pixels.b.allFinite())
            throw std::invalid_argument("encode_image: non-finite input");
        int h = pixels.height(), w = pixels.width();
        Eigen::MatrixXd flat(1, 3 * h * w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                flat(0, y * w + x) = pixels.r(y, x);
                flat(0, h * w + y * w + x) = pixels.g(y, x);
                flat(0, 2 * h * w + y * w + x) = pixels.b(y, x);
            }
        ad::Var v = ad::constant(std::move(flat));
        ad::Var hdn = ad::tanh_act(ad::add_rowvec(
            ad::matmul(v, params_.get("image_encoder/stem/w")),
            params_.get("image_encoder/stem/b")));
        ad::Var out = ad::add_rowvec(
            ad::matmul(hdn, params_.get("image_encoder/last_block/w")),
            params_.get("image_encoder/last_block/b"));
        return ad::l2_normalize_rows(out);
    }

    ad::Var encode_text(const std::vector<ad::Var>& token_embs) override {
        if (token_embs.empty()) throw std::invalid_argument("encode_text: empty sequence");
        ad::Var seq = ad::stack_rows(token_embs);
        ad::Var mean = ad::mean_rows(seq);
        ad::Var out = ad::add_rowvec(ad::matmul(mean, params_.get("text_encoder/proj/w")),
                                     params_.get("text_encoder/proj/b"));
        return ad::l2_normalize_rows(out);
    }

    ad::Var token_embed(int token_id) override {
        if (token_id < 0 || token_id >= kToyVocabSize)
            throw std::out_of_range("token id outside toy vocabulary");
        return ad::gather_rows(params_.get("token_embed/table"), {token_id});
    }

private:
    int embed_dim_;
    int token_dim_;
    int image_size_;
};

}  // namespace

std::unique_ptr<EncoderBackend> make_toy_backend(ParamStore& store, std::uint64_t seed,
                                                 int embed_dim, int token_dim,
                                                 int image_size) {
    return std::make_unique<ToyBackend>(store, seed, embed_dim, token_dim, image_size);
}

}  // namespace tpsnet
