#include "tpsnet/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <tuple>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "tpsnet/image_io.hpp"
#include "tpsnet/rng.hpp"

namespace fs = std::filesystem;

namespace tpsnet {

Model Model::build(const RunConfig& cfg) {
    if (cfg.backend != "toy")
        throw std::runtime_error(
            "backend '" + cfg.backend + "' requires pretrained weights support; "
            "only the 'toy' backend ships with this build");
    Model m;
    m.cfg = cfg;
    // Registration order fixes the parameter layout.
    m.backend = make_toy_backend(m.store, cfg.seed, cfg.embed_dim, cfg.token_dim,
                                 cfg.image_size);
    m.phase = std::make_unique<PhaseEncoder>(m.store, cfg.image_size, cfg.embed_dim,
                                             cfg.seed);
    m.fusion = std::make_unique<FusionHead>(m.store, cfg.embed_dim, cfg.seed);
    m.synergy = std::make_unique<SynergyHead>(m.store, cfg.embed_dim, cfg.seed);
    m.bank = std::make_unique<DomainPromptBank>(m.store, cfg.num_categories,
                                                cfg.num_tokens, cfg.token_dim, cfg.seed);
    m.tmpl = default_prompt_template(cfg.num_tokens);
    for (auto& p : m.prototypes) {
        p.prototypes = Eigen::MatrixXd::Zero(cfg.num_categories, cfg.embed_dim);
        p.momentum = cfg.prototype_momentum;
    }
    return m;
}

std::pair<DomainDataset, DomainDataset> load_datasets(const RunConfig& cfg) {
    if (cfg.data.is_toy)
        return generate_toy_domain_pair(cfg.data.toy.num_classes, cfg.data.toy.per_class,
                                        cfg.data.toy.image_size, cfg.seed);
    return {load_domain_directory(cfg.data.root_a, 0),
            load_domain_directory(cfg.data.root_b, 1)};
}

ad::Var text_priors(Model& model, int domain) {
    std::vector<ad::Var> rows;
    for (int c = 0; c < model.cfg.num_categories; ++c)
        rows.push_back(encode_prompt(*model.bank, model.tmpl, domain, c, *model.backend));
    return ad::constant(ad::stack_rows(rows)->value);
}

Eigen::MatrixXd embed_domain(Model& model, const DomainDataset& ds) {
    ad::Var texts = text_priors(model, ds.domain_id);
    InferencePriors priors{model.cfg.use_text_prior, model.cfg.use_phase_prior,
                           model.cfg.amplitude};
    Eigen::MatrixXd out(ds.samples.size(), model.cfg.embed_dim);
    for (size_t i = 0; i < ds.samples.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) =
            encode_fused(ds.samples[i], *model.backend, *model.phase, *model.fusion,
                         *model.synergy, texts, priors, /*training=*/false)->value;
    return out;
}

DpgOptions dpg_options(const RunConfig& cfg, const std::string& log_csv) {
    DpgOptions o;
    o.epochs = cfg.epochs_dpg;
    o.batch_size = cfg.batch_size;
    o.warmup_epochs = cfg.warmup_epochs;
    o.tau = cfg.temperature;
    o.lr = cfg.learning_rate;
    o.cosine_decay = cfg.schedule == "cosine";
    o.seed = cfg.seed;
    o.log_csv_path = log_csv;
    return o;
}

TpdpOptions tpdp_options(const RunConfig& cfg, const std::string& log_csv) {
    TpdpOptions o;
    o.epochs = cfg.epochs_tpdp;
    o.batch_size = cfg.batch_size;
    o.tau = cfg.temperature;
    o.eps_smooth = cfg.label_smoothing;
    o.proto_momentum = cfg.prototype_momentum;
    o.alpha = cfg.alpha;
    o.beta = cfg.beta;
    o.amplitude = cfg.amplitude;
    o.lr = cfg.learning_rate;
    o.cosine_decay = cfg.schedule == "cosine";
    o.use_text_prior = cfg.use_text_prior;
    o.use_phase_prior = cfg.use_phase_prior;
    o.seed = cfg.seed;
    o.log_csv_path = log_csv;
    return o;
}

Checkpoint make_checkpoint(const Model& model, const std::string& rng_state) {
    Checkpoint ckpt;
    ckpt.config = model.cfg;
    ckpt.rng_state = rng_state;
    for (const auto& name : model.store.names())
        if (group_of(name) != ParamGroup::kFrozen)
            ckpt.blobs.emplace_back(name, model.store.get(name)->value);
    for (int d = 0; d < 2; ++d)
        ckpt.blobs.emplace_back("prototypes/d" + std::to_string(d),
                                model.prototypes[d].prototypes);
    ckpt.blobs.emplace_back("state/phase/bn1/running_mean", model.phase->bn1_mean);
    ckpt.blobs.emplace_back("state/phase/bn1/running_var", model.phase->bn1_var);
    ckpt.blobs.emplace_back("state/phase/bn2/running_mean", model.phase->bn2_mean);
    ckpt.blobs.emplace_back("state/phase/bn2/running_var", model.phase->bn2_var);
    return ckpt;
}

void apply_checkpoint(Model& model, const Checkpoint& ckpt) {
    for (const auto& [name, value] : ckpt.blobs) {
        if (name.rfind("prototypes/d", 0) == 0) {
            int d = name.back() - '0';
            model.prototypes.at(d).prototypes = value;
        } else if (name.rfind("state/", 0) == 0) {
            if (name == "state/phase/bn1/running_mean") model.phase->bn1_mean = value;
            else if (name == "state/phase/bn1/running_var") model.phase->bn1_var = value;
            else if (name == "state/phase/bn2/running_mean") model.phase->bn2_mean = value;
            else if (name == "state/phase/bn2/running_var") model.phase->bn2_var = value;
            else throw std::runtime_error("unknown checkpoint state blob: " + name);
        } else {
            model.store.set_value(name, value);
        }
    }
}

Checkpoint make_prompt_checkpoint(const Model& model) {
    Checkpoint ckpt;
    ckpt.config = model.cfg;
    ckpt.rng_state = "";
    for (const auto& name : model.store.names())
        if (group_of(name) == ParamGroup::kPromptTokens)
            ckpt.blobs.emplace_back(name, model.store.get(name)->value);
    return ckpt;
}

void apply_prompt_checkpoint(Model& model, const Checkpoint& ckpt) {
    bool any = false;
    for (const auto& [name, value] : ckpt.blobs)
        if (group_of(name) == ParamGroup::kPromptTokens) {
            model.store.set_value(name, value);
            any = true;
        }
    if (!any) throw std::runtime_error("archive contains no prompt bank");
}

MetricsTable evaluate_model(Model& model, const DomainDataset& domain_a,
                            const DomainDataset& domain_b) {
    std::vector<DomainEmbeddings> domains;
    for (const DomainDataset* ds : {&domain_a, &domain_b}) {
        DomainEmbeddings de;
        de.domain_id = ds->domain_id;
        de.embeddings = embed_domain(model, *ds);
        for (const auto& s : ds->samples) de.labels.push_back(s.eval_label());
        domains.push_back(std::move(de));
    }
    return evaluate_scenarios(domains, model.cfg.eval_ks);
}

void write_toy_tree(const RunConfig& cfg, const std::string& out_dir) {
    if (!cfg.data.is_toy)
        throw std::runtime_error("gen-toy requires a toy data section in the config");
    auto [a, b] = load_datasets(cfg);
    for (const DomainDataset* ds : {&a, &b}) {
        std::vector<int> index_in_class(cfg.data.toy.num_classes, 0);
        for (const auto& s : ds->samples) {
            int label = s.eval_label();
            std::ostringstream cls, file;
            cls << "class_" << std::setw(2) << std::setfill('0') << label;
            fs::path dir = fs::path(out_dir) /
                           ("domain" + std::to_string(ds->domain_id)) / cls.str();
            fs::create_directories(dir);
            file << std::setw(4) << std::setfill('0') << index_in_class[label]++ << ".png";
            save_image_png(s.pixels, (dir / file.str()).string());
        }
    }
}

void write_embedding_plot(Model& model, const DomainDataset& domain_a,
                          const DomainDataset& domain_b, const std::string& svg_path) {
    // Seeded random 2-D projection; diagnostic, not a t-SNE reproduction.
    auto rng = make_rng(mix_seed(model.cfg.seed, 0x5c47ULL));
    Eigen::MatrixXd proj = random_normal(rng, model.cfg.embed_dim, 2,
                                         1.0 / std::sqrt(model.cfg.embed_dim));
    std::ostringstream body;
    double lo_x = 1e30, hi_x = -1e30, lo_y = 1e30, hi_y = -1e30;
    std::vector<std::tuple<double, double, int, int>> points;
    for (const DomainDataset* ds : {&domain_a, &domain_b}) {
        Eigen::MatrixXd embs = embed_domain(model, *ds);
        Eigen::MatrixXd p2 = embs * proj;
        for (Eigen::Index i = 0; i < p2.rows(); ++i) {
            points.emplace_back(p2(i, 0), p2(i, 1), ds->samples[i].eval_label(),
                                ds->domain_id);
            lo_x = std::min(lo_x, p2(i, 0)); hi_x = std::max(hi_x, p2(i, 0));
            lo_y = std::min(lo_y, p2(i, 1)); hi_y = std::max(hi_y, p2(i, 1));
        }
    }
    const char* palette[] = {"#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
                             "#a65628", "#f781bf", "#999999"};
    const double size = 640.0, margin = 24.0;
    auto sx = [&](double x) { return margin + (x - lo_x) / (hi_x - lo_x + 1e-12) * (size - 2 * margin); };
    auto sy = [&](double y) { return margin + (y - lo_y) / (hi_y - lo_y + 1e-12) * (size - 2 * margin); };
    for (const auto& [x, y, label, domain] : points) {
        const char* color = palette[label % 8];
        if (domain == 0)
            body << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y)
                 << "\" r=\"3.5\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
        else
            body << "<rect x=\"" << sx(x) - 3 << "\" y=\"" << sy(y) - 3
                 << "\" width=\"6\" height=\"6\" fill=\"" << color
                 << "\" fill-opacity=\"0.8\"/>\n";
    }
    std::ofstream out(svg_path);
    if (!out) throw std::runtime_error("cannot write plot: " + svg_path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
        << "\" height=\"" << size << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body.str() << "</svg>\n";
}

}  // namespace tpsnet
