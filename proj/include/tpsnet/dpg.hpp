#pragma once

#include <string>
#include <vector>

#include "tpsnet/ad.hpp"
#include "tpsnet/backbone.hpp"
#include "tpsnet/dataset.hpp"

namespace tpsnet {

// Dynamic image-text pairing: each image is assigned the most similar
// prompt by cosine similarity, ties to the lowest index.
struct RePairing {
    std::vector<int> y;     // per-image category id
    ad::Var paired_text;    // N x d, row i = text_embs[y_i]
};

RePairing repair_pairs(const ad::Var& image_embs, const ad::Var& text_embs);

// Image-to-text InfoNCE; the denominator runs over the N in-batch
// paired texts, duplicates included.
ad::Var loss_i2t(const ad::Var& image_embs, const std::vector<int>& y,
                 const ad::Var& text_embs, double tau);

// Text-to-image supervised contrastive loss with in-batch positives.
ad::Var loss_t2i(const ad::Var& image_embs, const std::vector<int>& y,
                 const ad::Var& text_embs, double tau);

struct DpgOptions {
    int epochs = 30;
    int batch_size = 50;
    int warmup_epochs = 5;  // pair against k-means pseudo-labels first
    double tau = 0.07;
    double lr = 1e-4;
    bool cosine_decay = true;
    std::uint64_t seed = 0;
    AugmentOptions aug;
    std::string log_csv_path;  // per-epoch loss log; empty = no log
};

// Tunes the prompt bank against a frozen backbone. Only the
// prompt_tokens group is updated.
void train_prompts(const DomainDataset& domain_a, const DomainDataset& domain_b,
                   EncoderBackend& backend, DomainPromptBank& bank,
                   const PromptTemplate& tmpl, const DpgOptions& opts);

}  // namespace tpsnet
