#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace tpsnet {

struct ToyDataParams {
    int num_classes = 5;
    int per_class = 50;
    int image_size = 32;

    bool operator==(const ToyDataParams&) const = default;
};

struct DataSource {
    bool is_toy = true;
    ToyDataParams toy;
    std::string root_a;
    std::string root_b;

    bool operator==(const DataSource&) const = default;
};

// Full run configuration. JSON parsing is strict: unknown keys are
// rejected at every nesting level and every numeric field is range
// checked.
struct RunConfig {
    std::string backend = "toy";           // toy | pretrained-vlm
    std::string pretrained_weights;        // used by pretrained-vlm only
    int embed_dim = 64;
    int token_dim = 32;
    int image_size = 32;
    int num_tokens = 4;        // M
    int num_categories = 5;    // K = C
    double temperature = 0.07;
    double label_smoothing = 0.1;
    double prototype_momentum = 0.9;
    double alpha = 1.0;
    double beta = 0.2;
    double amplitude = 1.0;    // R
    double learning_rate = 1e-4;
    std::string schedule = "cosine";       // cosine | constant
    int epochs_dpg = 30;
    int epochs_tpdp = 30;
    int batch_size = 50;
    int warmup_epochs = 5;
    std::uint64_t seed = 0;
    DataSource data;
    std::vector<int> eval_ks = {1, 5, 15};
    bool use_text_prior = true;
    bool use_phase_prior = true;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load_file(const std::string& path);
    void save_file(const std::string& path) const;

    bool operator==(const RunConfig&) const = default;
};

}  // namespace tpsnet
