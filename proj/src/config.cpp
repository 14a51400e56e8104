#include "tpsnet/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace tpsnet {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

void check(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("config: " + msg);
}

}  // namespace

json RunConfig::to_json() const {
    json d;
    if (data.is_toy)
        d["toy"] = {{"num_classes", data.toy.num_classes},
                    {"per_class", data.toy.per_class},
                    {"image_size", data.toy.image_size}};
    else
        d = {{"root_a", data.root_a}, {"root_b", data.root_b}};
    return json{{"backend", backend},
                {"pretrained_weights", pretrained_weights},
                {"embed_dim", embed_dim},
                {"token_dim", token_dim},
                {"image_size", image_size},
                {"num_tokens", num_tokens},
                {"num_categories", num_categories},
                {"temperature", temperature},
                {"label_smoothing", label_smoothing},
                {"prototype_momentum", prototype_momentum},
                {"alpha", alpha},
                {"beta", beta},
                {"amplitude", amplitude},
                {"learning_rate", learning_rate},
                {"schedule", schedule},
                {"epochs_dpg", epochs_dpg},
                {"epochs_tpdp", epochs_tpdp},
                {"batch_size", batch_size},
                {"warmup_epochs", warmup_epochs},
                {"seed", seed},
                {"data", d},
                {"eval_ks", eval_ks},
                {"use_text_prior", use_text_prior},
                {"use_phase_prior", use_phase_prior}};
}

RunConfig RunConfig::from_json(const json& j) {
    static const std::set<std::string> top_keys = {
        "backend", "pretrained_weights", "embed_dim", "token_dim", "image_size",
        "num_tokens", "num_categories", "temperature", "label_smoothing",
        "prototype_momentum", "alpha", "beta", "amplitude", "learning_rate",
        "schedule", "epochs_dpg", "epochs_tpdp", "batch_size", "warmup_epochs",
        "seed", "data", "eval_ks", "use_text_prior", "use_phase_prior"};
    if (!j.is_object()) throw std::invalid_argument("config: root must be an object");
    reject_unknown(j, top_keys, "root");

    RunConfig c;
    c.backend = get_or<std::string>(j, "backend", c.backend);
    c.pretrained_weights = get_or<std::string>(j, "pretrained_weights", c.pretrained_weights);
    c.embed_dim = get_or(j, "embed_dim", c.embed_dim);
    c.token_dim = get_or(j, "token_dim", c.token_dim);
    c.image_size = get_or(j, "image_size", c.image_size);
    c.num_tokens = get_or(j, "num_tokens", c.num_tokens);
    c.num_categories = get_or(j, "num_categories", c.num_categories);
    c.temperature = get_or(j, "temperature", c.temperature);
    c.label_smoothing = get_or(j, "label_smoothing", c.label_smoothing);
    c.prototype_momentum = get_or(j, "prototype_momentum", c.prototype_momentum);
    c.alpha = get_or(j, "alpha", c.alpha);
    c.beta = get_or(j, "beta", c.beta);
    c.amplitude = get_or(j, "amplitude", c.amplitude);
    c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
    c.schedule = get_or<std::string>(j, "schedule", c.schedule);
    c.epochs_dpg = get_or(j, "epochs_dpg", c.epochs_dpg);
    c.epochs_tpdp = get_or(j, "epochs_tpdp", c.epochs_tpdp);
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.warmup_epochs = get_or(j, "warmup_epochs", c.warmup_epochs);
    c.seed = get_or(j, "seed", c.seed);
    c.eval_ks = get_or(j, "eval_ks", c.eval_ks);
    c.use_text_prior = get_or(j, "use_text_prior", c.use_text_prior);
    c.use_phase_prior = get_or(j, "use_phase_prior", c.use_phase_prior);

    if (j.contains("data")) {
        const json& d = j.at("data");
        if (d.contains("toy")) {
            reject_unknown(d, {"toy"}, "data");
            reject_unknown(d.at("toy"), {"num_classes", "per_class", "image_size"},
                           "data.toy");
            c.data.is_toy = true;
            c.data.toy.num_classes = get_or(d.at("toy"), "num_classes", c.data.toy.num_classes);
            c.data.toy.per_class = get_or(d.at("toy"), "per_class", c.data.toy.per_class);
            c.data.toy.image_size = get_or(d.at("toy"), "image_size", c.data.toy.image_size);
        } else {
            reject_unknown(d, {"root_a", "root_b"}, "data");
            c.data.is_toy = false;
            c.data.root_a = d.at("root_a").get<std::string>();
            c.data.root_b = d.at("root_b").get<std::string>();
        }
    }

    check(c.backend == "toy" || c.backend == "pretrained-vlm",
          "backend must be 'toy' or 'pretrained-vlm'");
    check(c.embed_dim >= 8, "embed_dim must be >= 8");
    check(c.token_dim >= 1, "token_dim must be >= 1");
    check(c.image_size >= 16 && c.image_size % 4 == 0,
          "image_size must be >= 16 and divisible by 4");
    check(c.num_tokens >= 1, "num_tokens (M) must be >= 1");
    check(c.num_categories >= 1, "num_categories must be >= 1");
    check(c.temperature > 0.0, "temperature must be positive");
    check(c.label_smoothing >= 0.0 && c.label_smoothing < 1.0,
          "label_smoothing must be in [0,1)");
    check(c.prototype_momentum >= 0.0 && c.prototype_momentum <= 1.0,
          "prototype_momentum must be in [0,1]");
    check(c.alpha >= 0.0 && c.beta >= 0.0, "alpha and beta must be nonnegative");
    check(c.amplitude != 0.0, "amplitude (R) must be nonzero");
    check(c.learning_rate > 0.0, "learning_rate must be positive");
    check(c.schedule == "cosine" || c.schedule == "constant",
          "schedule must be 'cosine' or 'constant'");
    check(c.epochs_dpg >= 0 && c.epochs_tpdp >= 0, "epoch counts must be nonnegative");
    check(c.batch_size >= 1, "batch_size must be >= 1");
    check(c.warmup_epochs >= 0, "warmup_epochs must be nonnegative");
    check(!c.eval_ks.empty(), "eval_ks must not be empty");
    for (int k : c.eval_ks) check(k >= 1, "eval_ks entries must be >= 1");
    if (c.data.is_toy) {
        check(c.data.toy.num_classes >= 2, "toy num_classes must be >= 2");
        check(c.data.toy.per_class >= 2, "toy per_class must be >= 2");
        check(c.data.toy.image_size >= 16, "toy image_size must be >= 16");
    }
    return c;
}

RunConfig RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    in >> j;
    return from_json(j);
}

void RunConfig::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << to_json().dump(2) << "\n";
}

}  // namespace tpsnet
