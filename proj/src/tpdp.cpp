#include "tpsnet/tpdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "tpsnet/rng.hpp"

namespace tpsnet {

FusionHead::FusionHead(ParamStore& store, int dim, std::uint64_t seed,
                       const std::string& prefix)
    : store_(store), dim_(dim), prefix_(prefix) {
    auto rng = make_rng(mix_seed(seed, std::hash<std::string>{}(prefix)));
    double sd = std::sqrt(1.0 / dim);
    store.add(prefix + "/wq", random_normal(rng, dim, dim, sd));
    store.add(prefix + "/bq", Eigen::MatrixXd::Zero(1, dim));
    store.add(prefix + "/wk", random_normal(rng, dim, dim, sd));
    store.add(prefix + "/bk", Eigen::MatrixXd::Zero(1, dim));
    // Zero-initialized value/output path: the attention update starts at 0.
    store.add(prefix + "/wv", Eigen::MatrixXd::Zero(dim, dim));
    store.add(prefix + "/bv", Eigen::MatrixXd::Zero(1, dim));
    store.add(prefix + "/wo", Eigen::MatrixXd::Zero(dim, dim));
    store.add(prefix + "/bo", Eigen::MatrixXd::Zero(1, dim));
    store.add(prefix + "/ln_gamma", Eigen::MatrixXd::Ones(1, dim));
    store.add(prefix + "/ln_beta", Eigen::MatrixXd::Zero(1, dim));
}

namespace {

// Single-head attention: queries from `q_in`, keys/values from `kv_in`.
ad::Var attention(const ad::Var& q_in, const ad::Var& kv_in, const FusionHead& head) {
    ParamStore& ps = head.store();
    const std::string& p = head.prefix();
    ad::Var q = ad::add_rowvec(ad::matmul(q_in, ps.get(p + "/wq")), ps.get(p + "/bq"));
    ad::Var k = ad::add_rowvec(ad::matmul(kv_in, ps.get(p + "/wk")), ps.get(p + "/bk"));
    ad::Var v = ad::add_rowvec(ad::matmul(kv_in, ps.get(p + "/wv")), ps.get(p + "/bv"));
    ad::Var weights = ad::softmax_rows(
        ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(head.dim()))));
    return ad::add_rowvec(ad::matmul(ad::matmul(weights, v), ps.get(p + "/wo")),
                          ps.get(p + "/bo"));
}

}  // namespace

ad::Var fuse_rgb_phase(const ad::Var& rgb, const ad::Var& phase, const FusionHead& head) {
    ad::Var tokens = ad::stack_rows({rgb, phase});
    ad::Var attended = ad::add(tokens, attention(tokens, tokens, head));
    ad::Var normed = ad::layer_norm_rows(attended, head.store().get(head.prefix() + "/ln_gamma"),
                                         head.store().get(head.prefix() + "/ln_beta"));
    return ad::l2_normalize_rows(ad::mean_rows(normed));
}

ad::Var cross_attend(const ad::Var& text_feats, const ad::Var& token_seq,
                     const ad::Var& fused, const SynergyHead& head) {
    if (text_feats->value.rows() == 0)
        throw std::invalid_argument("cross_attend: no text features");
    ad::Var attended = attention(text_feats, token_seq, head);
    ad::Var agg = ad::mean_rows(attended);
    ad::Var residual = ad::add(fused, agg);
    ad::Var normed = ad::layer_norm_rows(residual,
                                         head.store().get(head.prefix() + "/ln_gamma"),
                                         head.store().get(head.prefix() + "/ln_beta"));
    return ad::l2_normalize_rows(normed);
}

Eigen::VectorXd smoothing_labels(int y, int num_categories, double eps) {
    if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("smoothing_labels: eps in [0,1)");
    if (y < 0 || y >= num_categories)
        throw std::invalid_argument("smoothing_labels: label out of range");
    Eigen::VectorXd sigma =
        Eigen::VectorXd::Constant(num_categories, eps / num_categories);
    sigma(y) += 1.0 - eps;
    return sigma;
}

ad::Var loss_pce(const ad::Var& embeddings, const ad::Var& prototypes,
                 const std::vector<int>& y, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("loss_pce: tau must be positive");
    const Eigen::Index n = embeddings->value.rows();
    if (static_cast<Eigen::Index>(y.size()) != n)
        throw std::invalid_argument("loss_pce: label count mismatch");
    ad::Var sims = ad::scale(ad::matmul_nt(embeddings, prototypes), 1.0 / tau);
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, prototypes->value.rows());
    for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[i]) = 1.0;
    double inv_n = 1.0 / static_cast<double>(n);
    return ad::sub(ad::weighted_sum(ad::logsumexp_rows(sims),
                                    Eigen::MatrixXd::Constant(n, 1, inv_n)),
                   ad::weighted_sum(sims, onehot * inv_n));
}

ad::Var loss_i2tce(const ad::Var& embeddings, const ad::Var& text_feats,
                   const Eigen::MatrixXd& targets, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("loss_i2tce: tau must be positive");
    const Eigen::Index n = embeddings->value.rows();
    if (targets.rows() != n || targets.cols() != text_feats->value.rows())
        throw std::invalid_argument("loss_i2tce: target shape mismatch");
    ad::Var sims = ad::scale(ad::matmul_nt(embeddings, text_feats), 1.0 / tau);
    double inv_n = 1.0 / static_cast<double>(n);
    // sum_j sigma_j = 1 per row, so the logsumexp weight per row is 1/N.
    return ad::sub(ad::weighted_sum(ad::logsumexp_rows(sims),
                                    Eigen::MatrixXd::Constant(n, 1, inv_n)),
                   ad::weighted_sum(sims, targets * inv_n));
}

ad::Var total_loss(const ad::Var& pce, const ad::Var& i2tce, double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0)
        throw std::invalid_argument("total_loss: weights must be nonnegative");
    return ad::add(ad::scale(pce, alpha), ad::scale(i2tce, beta));
}

ad::Var encode_fused(const ImageSample& sample, EncoderBackend& backend,
                     PhaseEncoder& phase_enc, const FusionHead& fusion,
                     const SynergyHead& synergy, const ad::Var& texts,
                     const InferencePriors& priors, bool training) {
    ad::Var rgb = backend.encode_image(sample.pixels);
    ad::Var phase_emb;
    if (priors.use_phase_prior) {
        PhaseImage ph = phase_only_reconstruct(to_grayscale(sample), priors.amplitude,
                                               sample.sample_id);
        phase_emb = ad::l2_normalize_rows(phase_enc.encode(ph, training));
    } else {
        phase_emb = rgb;  // phase branch ablated: duplicate the RGB token
    }
    ad::Var fused = fuse_rgb_phase(rgb, phase_emb, fusion);
    if (!priors.use_text_prior) return fused;
    ad::Var token_seq = ad::stack_rows({rgb, phase_emb});
    return cross_attend(texts, token_seq, fused, synergy);
}

namespace {

Eigen::MatrixXd embed_dataset(const DomainDataset& ds, EncoderBackend& backend,
                              PhaseEncoder& phase_enc, const FusionHead& fusion,
                              const SynergyHead& synergy, const ad::Var& texts,
                              const InferencePriors& priors) {
    Eigen::MatrixXd out(ds.samples.size(), backend.embed_dim());
    for (size_t i = 0; i < ds.samples.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) =
            encode_fused(ds.samples[i], backend, phase_enc, fusion, synergy, texts,
                         priors, /*training=*/false)->value;
    return out;
}

}  // namespace

TpdpResult train_tpdp(const DomainDataset& domain_a, const DomainDataset& domain_b,
                      EncoderBackend& backend, const DomainPromptBank& bank,
                      const PromptTemplate& tmpl, PhaseEncoder& phase_enc,
                      const FusionHead& fusion, const SynergyHead& synergy,
                      const TpdpOptions& opts) {
    LabelAccessGuard guard;
    const DomainDataset* domains[2] = {&domain_a, &domain_b};
    const int num_cats = bank.num_categories();
    for (int d = 0; d < 2; ++d)
        if (static_cast<int>(domains[d]->samples.size()) < 1)
            throw std::invalid_argument("train_tpdp: empty domain dataset");

    InferencePriors priors{opts.use_text_prior, opts.use_phase_prior, opts.amplitude};

    // Text priors come from the frozen prompt bank; detach them once.
    ad::Var texts[2];
    for (int d = 0; d < 2; ++d) {
        std::vector<ad::Var> rows;
        for (int c = 0; c < num_cats; ++c)
            rows.push_back(encode_prompt(bank, tmpl, d, c, backend));
        texts[d] = ad::constant(ad::stack_rows(rows)->value);
    }

    // Initial pseudo-labels from k-means on the frozen image embeddings;
    // the fusion stack is still randomly initialized here and clustering
    // its output would only fold that noise into the labels. Prototypes
    // live in the fused space, so they are built from the fused features
    // under those assignments.
    TpdpResult result;
    for (int d = 0; d < 2; ++d) {
        const auto& samples = domains[d]->samples;
        Eigen::MatrixXd rgb_feats(samples.size(), backend.embed_dim());
        for (size_t i = 0; i < samples.size(); ++i)
            rgb_feats.row(static_cast<Eigen::Index>(i)) =
                backend.encode_image(samples[i].pixels)->value;
        auto km = kmeans_cluster(rgb_feats, num_cats, mix_seed(opts.seed, 200 + d));
        result.assignments[d] = km.assignment;
        result.assignments[d].domain_id = d;
        Eigen::MatrixXd fused = embed_dataset(*domains[d], backend, phase_enc, fusion,
                                              synergy, texts[d], priors);
        result.prototypes[d] =
            init_prototypes(fused, km.assignment, num_cats, opts.proto_momentum);
    }

    int steps_per_epoch = 0;
    for (int d = 0; d < 2; ++d) {
        int n = static_cast<int>(domains[d]->samples.size());
        int bs = std::min(opts.batch_size, n);
        steps_per_epoch = std::max(steps_per_epoch, (n + bs - 1) / bs);
    }

    AdamConfig adam_cfg;
    adam_cfg.lr = opts.lr;
    adam_cfg.cosine_decay = opts.cosine_decay;
    adam_cfg.total_steps = std::max(1, opts.epochs * steps_per_epoch);
    AdamOptimizer opt(backend.params(), adam_cfg,
                      {ParamGroup::kImageLastBlock, ParamGroup::kFusionHeads});

    std::ofstream log;
    if (!opts.log_csv_path.empty()) {
        log.open(opts.log_csv_path);
        log << "epoch,domain,loss_pce,loss_i2tce,total\n";
    }

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        std::vector<int> order[2];
        for (int d = 0; d < 2; ++d) {
            std::vector<int> idx(domains[d]->samples.size());
            std::iota(idx.begin(), idx.end(), 0);
            auto rng = make_rng(mix_seed(opts.seed, 104729ULL * (epoch + 1) + d));
            std::shuffle(idx.begin(), idx.end(), rng);
            order[d] = std::move(idx);
        }
        double epoch_pce[2] = {0, 0}, epoch_i2tce[2] = {0, 0};
        int epoch_batches[2] = {0, 0};

        for (int step = 0; step < steps_per_epoch; ++step) {
            backend.params().zero_grad();
            ad::Var domain_losses[2];
            for (int d = 0; d < 2; ++d) {
                const auto& ds = *domains[d];
                int n = static_cast<int>(ds.samples.size());
                int bs = std::min(opts.batch_size, n);
                std::vector<ad::Var> rows;
                std::vector<int> labels;
                for (int k = 0; k < bs; ++k) {
                    int idx = order[d][(step * bs + k) % n];
                    auto rng = make_rng(mix_seed(opts.seed,
                        0x7bdfULL ^ (static_cast<std::uint64_t>(epoch) << 32) ^
                        (static_cast<std::uint64_t>(d) << 24) ^ idx));
                    ImageSample augmented = augment(ds.samples[idx], rng, opts.aug);
                    rows.push_back(encode_fused(augmented, backend, phase_enc, fusion,
                                                synergy, texts[d], priors,
                                                /*training=*/true));
                    labels.push_back(result.assignments[d].labels[idx]);
                }
                ad::Var embs = ad::stack_rows(rows);
                // Per-sample momentum refresh before the loss.
                for (int k = 0; k < bs; ++k)
                    momentum_update(result.prototypes[d], labels[k],
                                    embs->value.row(k).transpose(), opts.proto_momentum);
                ad::Var protos = ad::constant(result.prototypes[d].prototypes);
                ad::Var pce = loss_pce(embs, protos, labels, opts.tau);
                ad::Var l_total;
                double i2tce_val = 0.0;
                if (opts.use_text_prior) {
                    Eigen::MatrixXd targets(bs, num_cats);
                    for (int k = 0; k < bs; ++k)
                        targets.row(k) =
                            smoothing_labels(labels[k], num_cats, opts.eps_smooth).transpose();
                    ad::Var i2tce = loss_i2tce(embs, texts[d], targets, opts.tau);
                    i2tce_val = i2tce->value(0, 0);
                    l_total = total_loss(pce, i2tce, opts.alpha, opts.beta);
                } else {
                    l_total = ad::scale(pce, opts.alpha);
                }
                epoch_pce[d] += pce->value(0, 0);
                epoch_i2tce[d] += i2tce_val;
                ++epoch_batches[d];
                domain_losses[d] = l_total;
            }
            ad::Var total = ad::scale(ad::add(domain_losses[0], domain_losses[1]), 0.5);
            ad::backward(total);
            opt.step();
        }

        // Per-epoch pseudo-label refresh against the updated prototypes.
        for (int d = 0; d < 2; ++d) {
            Eigen::MatrixXd feats = embed_dataset(*domains[d], backend, phase_enc, fusion,
                                                  synergy, texts[d], priors);
            result.assignments[d] = reassign_by_prototype(feats, result.prototypes[d]);
            result.assignments[d].domain_id = d;
            result.assignments[d].epoch = epoch + 1;
        }

        if (log.is_open())
            for (int d = 0; d < 2; ++d) {
                double pce = epoch_pce[d] / std::max(1, epoch_batches[d]);
                double ice = epoch_i2tce[d] / std::max(1, epoch_batches[d]);
                log << epoch << "," << d << "," << pce << "," << ice << ","
                    << opts.alpha * pce + opts.beta * ice << "\n";
            }
    }
    return result;
}

}  // namespace tpsnet
