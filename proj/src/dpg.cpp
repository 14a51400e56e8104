#include "tpsnet/dpg.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tpsnet/pseudolabel.hpp"
#include "tpsnet/rng.hpp"

namespace tpsnet {

RePairing repair_pairs(const ad::Var& image_embs, const ad::Var& text_embs) {
    const Eigen::MatrixXd& imgs = image_embs->value;
    const Eigen::MatrixXd& txts = text_embs->value;
    RePairing out;
    out.y.resize(static_cast<size_t>(imgs.rows()));
    for (Eigen::Index i = 0; i < imgs.rows(); ++i) {
        double best = -std::numeric_limits<double>::max();
        int arg = 0;
        for (Eigen::Index c = 0; c < txts.rows(); ++c) {
            double s = imgs.row(i).dot(txts.row(c));
            if (s > best) {
                best = s;
                arg = static_cast<int>(c);
            }
        }
        out.y[static_cast<size_t>(i)] = arg;
    }
    out.paired_text = ad::gather_rows(text_embs, out.y);
    return out;
}

ad::Var loss_i2t(const ad::Var& image_embs, const std::vector<int>& y,
                 const ad::Var& text_embs, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("loss_i2t: tau must be positive");
    const Eigen::Index n = image_embs->value.rows();
    if (n < 1 || static_cast<Eigen::Index>(y.size()) != n)
        throw std::invalid_argument("loss_i2t: batch/label size mismatch");
    ad::Var paired = ad::gather_rows(text_embs, y);
    ad::Var sims = ad::scale(ad::matmul_nt(image_embs, paired), 1.0 / tau);
    ad::Var lse = ad::logsumexp_rows(sims);
    double inv_n = 1.0 / static_cast<double>(n);
    ad::Var pos = ad::weighted_sum(sims, Eigen::MatrixXd::Identity(n, n) * inv_n);
    return ad::sub(ad::weighted_sum(lse, Eigen::MatrixXd::Constant(n, 1, inv_n)), pos);
}

ad::Var loss_t2i(const ad::Var& image_embs, const std::vector<int>& y,
                 const ad::Var& text_embs, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("loss_t2i: tau must be positive");
    const Eigen::Index n = image_embs->value.rows();
    const Eigen::Index c = text_embs->value.rows();
    if (n < 1 || static_cast<Eigen::Index>(y.size()) != n)
        throw std::invalid_argument("loss_t2i: batch/label size mismatch");
    ad::Var sims = ad::scale(ad::matmul_nt(image_embs, text_embs), 1.0 / tau);
    // Per-anchor normalizers run over images for the anchor's text; with
    // the 1/|P| weights the double sum over anchors and positives
    // collapses to one positive term per image.
    ad::Var lse_cols = ad::logsumexp_rows(ad::transpose(sims));  // c x 1
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(c, 1);
    Eigen::MatrixXd positives = Eigen::MatrixXd::Zero(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] < 0 || y[i] >= c) throw std::invalid_argument("loss_t2i: label out of range");
        counts(y[i], 0) += 1.0;
        positives(i, y[i]) = 1.0;
    }
    double inv_n = 1.0 / static_cast<double>(n);
    return ad::sub(ad::weighted_sum(lse_cols, counts * inv_n),
                   ad::weighted_sum(sims, positives * inv_n));
}

namespace {

// Deterministic per-epoch shuffle of [0, n).
std::vector<int> shuffled_indices(int n, std::mt19937_64& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

Eigen::MatrixXd embed_all(const DomainDataset& ds, EncoderBackend& backend) {
    Eigen::MatrixXd out(ds.samples.size(), backend.embed_dim());
    for (size_t i = 0; i < ds.samples.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) =
            backend.encode_image(ds.samples[i].pixels)->value;
    return out;
}

}  // namespace

void train_prompts(const DomainDataset& domain_a, const DomainDataset& domain_b,
                   EncoderBackend& backend, DomainPromptBank& bank,
                   const PromptTemplate& tmpl, const DpgOptions& opts) {
    LabelAccessGuard guard;
    const DomainDataset* domains[2] = {&domain_a, &domain_b};
    const int num_cats = bank.num_categories();

    // Warm-up targets: k-means pseudo-labels on the frozen embeddings.
    std::vector<int> warm_labels[2];
    for (int d = 0; d < 2; ++d) {
        Eigen::MatrixXd embs = embed_all(*domains[d], backend);
        warm_labels[d] = kmeans_cluster(embs, num_cats, mix_seed(opts.seed, 100 + d))
                             .assignment.labels;
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
    AdamOptimizer opt(backend.params(), adam_cfg, {ParamGroup::kPromptTokens});

    std::ofstream log;
    if (!opts.log_csv_path.empty()) {
        log.open(opts.log_csv_path);
        log << "epoch,domain,loss_i2t,loss_t2i\n";
    }

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        bool warmup = epoch < opts.warmup_epochs;
        std::vector<int> order[2];
        for (int d = 0; d < 2; ++d) {
            auto rng = make_rng(mix_seed(opts.seed, 7919ULL * (epoch + 1) + d));
            order[d] = shuffled_indices(static_cast<int>(domains[d]->samples.size()), rng);
        }
        double epoch_i2t[2] = {0, 0}, epoch_t2i[2] = {0, 0};
        int epoch_batches[2] = {0, 0};

        for (int step = 0; step < steps_per_epoch; ++step) {
            backend.params().zero_grad();
            ad::Var domain_losses[2];
            for (int d = 0; d < 2; ++d) {
                const auto& ds = *domains[d];
                int n = static_cast<int>(ds.samples.size());
                int bs = std::min(opts.batch_size, n);
                std::vector<ad::Var> img_rows;
                std::vector<int> warm_batch;
                for (int k = 0; k < bs; ++k) {
                    int idx = order[d][(step * bs + k) % n];
                    auto rng = make_rng(mix_seed(opts.seed,
                        0xa06eULL ^ (static_cast<std::uint64_t>(epoch) << 32) ^
                        (static_cast<std::uint64_t>(d) << 24) ^ idx));
                    ImageSample aug = augment(ds.samples[idx], rng, opts.aug);
                    // The backbone is frozen here; detach its output.
                    img_rows.push_back(ad::constant(backend.encode_image(aug.pixels)->value));
                    warm_batch.push_back(warm_labels[d][idx]);
                }
                ad::Var images = ad::stack_rows(img_rows);
                std::vector<ad::Var> text_rows;
                for (int cat = 0; cat < num_cats; ++cat)
                    text_rows.push_back(encode_prompt(bank, tmpl, d, cat, backend));
                ad::Var texts = ad::stack_rows(text_rows);

                std::vector<int> targets =
                    warmup ? warm_batch : repair_pairs(images, texts).y;
                ad::Var li2t = loss_i2t(images, targets, texts, opts.tau);
                ad::Var lt2i = loss_t2i(images, targets, texts, opts.tau);
                epoch_i2t[d] += li2t->value(0, 0);
                epoch_t2i[d] += lt2i->value(0, 0);
                ++epoch_batches[d];
                domain_losses[d] = ad::add(li2t, lt2i);
            }
            ad::Var total = ad::scale(ad::add(domain_losses[0], domain_losses[1]), 0.5);
            ad::backward(total);
            opt.step();
        }
        if (log.is_open())
            for (int d = 0; d < 2; ++d)
                log << epoch << "," << d << ","
                    << epoch_i2t[d] / std::max(1, epoch_batches[d]) << ","
                    << epoch_t2i[d] / std::max(1, epoch_batches[d]) << "\n";
    }
}

}  // namespace tpsnet
