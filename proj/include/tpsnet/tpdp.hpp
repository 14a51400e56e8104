#pragma once

#include <array>
#include <string>
#include <vector>

#include "tpsnet/ad.hpp"
#include "tpsnet/backbone.hpp"
#include "tpsnet/dataset.hpp"
#include "tpsnet/dpg.hpp"
#include "tpsnet/pseudolabel.hpp"
#include "tpsnet/spectral.hpp"

namespace tpsnet {

// Single-head self-attention + layer norm over the 2-token RGB/phase
// stack. Value and output projections start at zero, so the attention
// update is initially the identity map on the token mean.
class FusionHead {
public:
    FusionHead(ParamStore& store, int dim, std::uint64_t seed,
               const std::string& prefix = "fusion");
    int dim() const { return dim_; }
    const std::string& prefix() const { return prefix_; }
    ParamStore& store() const { return store_; }

private:
    ParamStore& store_;
    int dim_;
    std::string prefix_;
};

// Same parameter layout under a different prefix; used for the
// text-query cross-attention.
class SynergyHead : public FusionHead {
public:
    SynergyHead(ParamStore& store, int dim, std::uint64_t seed)
        : FusionHead(store, dim, seed, "synergy") {}
};

// Mean over tokens of LayerNorm(X + SelfAttention(X)), L2-normalized.
ad::Var fuse_rgb_phase(const ad::Var& rgb, const ad::Var& phase, const FusionHead& head);

// Text features as queries over the 2-token visual sequence; mean over
// queries, residual onto the fused feature, layer norm, L2 normalize.
ad::Var cross_attend(const ad::Var& text_feats, const ad::Var& token_seq,
                     const ad::Var& fused, const SynergyHead& head);

// sigma_j = (1-eps) [j=y] + eps/C.
Eigen::VectorXd smoothing_labels(int y, int num_categories, double eps);

ad::Var loss_pce(const ad::Var& embeddings, const ad::Var& prototypes,
                 const std::vector<int>& y, double tau);
// targets: one smoothed row per sample.
ad::Var loss_i2tce(const ad::Var& embeddings, const ad::Var& text_feats,
                   const Eigen::MatrixXd& targets, double tau);
ad::Var total_loss(const ad::Var& pce, const ad::Var& i2tce, double alpha, double beta);

struct TpdpOptions {
    int epochs = 30;
    int batch_size = 50;
    double tau = 0.07;
    double eps_smooth = 0.1;
    double proto_momentum = 0.9;
    double alpha = 1.0;
    double beta = 0.2;
    double amplitude = 1.0;  // R
    double lr = 1e-4;
    bool cosine_decay = true;
    bool use_text_prior = true;
    bool use_phase_prior = true;
    std::uint64_t seed = 0;
    AugmentOptions aug;
    std::string log_csv_path;
};

struct InferencePriors {
    bool use_text_prior = true;
    bool use_phase_prior = true;
    double amplitude = 1.0;
};

// Full single-sample inference path: RGB encode, phase reconstruct and
// encode, fusion, text-query cross-attention. `texts` are the C prompt
// features of the sample's own domain.
ad::Var encode_fused(const ImageSample& sample, EncoderBackend& backend,
                     PhaseEncoder& phase_enc, const FusionHead& fusion,
                     const SynergyHead& synergy, const ad::Var& texts,
                     const InferencePriors& priors, bool training);

struct TpdpResult {
    std::array<PrototypeBank, 2> prototypes;
    std::array<PseudoLabelAssignment, 2> assignments;
};

TpdpResult train_tpdp(const DomainDataset& domain_a, const DomainDataset& domain_b,
                      EncoderBackend& backend, const DomainPromptBank& bank,
                      const PromptTemplate& tmpl, PhaseEncoder& phase_enc,
                      const FusionHead& fusion, const SynergyHead& synergy,
                      const TpdpOptions& opts);

}  // namespace tpsnet
