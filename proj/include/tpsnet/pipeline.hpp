#pragma once

#include <array>
#include <memory>
#include <string>

#include "tpsnet/backbone.hpp"
#include "tpsnet/checkpoint.hpp"
#include "tpsnet/config.hpp"
#include "tpsnet/dataset.hpp"
#include "tpsnet/dpg.hpp"
#include "tpsnet/pseudolabel.hpp"
#include "tpsnet/retrieval.hpp"
#include "tpsnet/spectral.hpp"
#include "tpsnet/tpdp.hpp"

namespace tpsnet {

// One assembled model: a shared parameter store plus every component
// registered against it in a fixed order.
struct Model {
    RunConfig cfg;
    ParamStore store;
    std::unique_ptr<EncoderBackend> backend;
    std::unique_ptr<PhaseEncoder> phase;
    std::unique_ptr<FusionHead> fusion;
    std::unique_ptr<SynergyHead> synergy;
    std::unique_ptr<DomainPromptBank> bank;
    PromptTemplate tmpl;
    std::array<PrototypeBank, 2> prototypes;

    static Model build(const RunConfig& cfg);
};

std::pair<DomainDataset, DomainDataset> load_datasets(const RunConfig& cfg);

// Frozen text-prior features of one domain (C x d, detached).
ad::Var text_priors(Model& model, int domain);

// Inference embeddings of every sample in dataset order.
Eigen::MatrixXd embed_domain(Model& model, const DomainDataset& ds);

DpgOptions dpg_options(const RunConfig& cfg, const std::string& log_csv = "");
TpdpOptions tpdp_options(const RunConfig& cfg, const std::string& log_csv = "");

// Checkpoint contents: every non-frozen parameter, the prototype banks
// and the phase-encoder running statistics.
Checkpoint make_checkpoint(const Model& model, const std::string& rng_state);
void apply_checkpoint(Model& model, const Checkpoint& ckpt);

// Prompt-bank-only archive written by the prompt-training stage.
Checkpoint make_prompt_checkpoint(const Model& model);
void apply_prompt_checkpoint(Model& model, const Checkpoint& ckpt);

MetricsTable evaluate_model(Model& model, const DomainDataset& domain_a,
                            const DomainDataset& domain_b);

// Toy dataset tree: out/domain{0,1}/class_<c>/<index>.png.
void write_toy_tree(const RunConfig& cfg, const std::string& out_dir);

void write_embedding_plot(Model& model, const DomainDataset& domain_a,
                          const DomainDataset& domain_b, const std::string& svg_path);

}  // namespace tpsnet
