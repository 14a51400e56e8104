#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "tpsnet/image_io.hpp"
#include "tpsnet/pipeline.hpp"
#include "tpsnet/rng.hpp"

namespace fs = std::filesystem;
using namespace tpsnet;

namespace {

int thread_cap() {
    if (const char* v = std::getenv("TPSNET_THREADS")) {
        int n = std::atoi(v);
        if (n >= 1) return n;
    }
    return 0;  // unlimited
}

RunConfig load_config(const std::string& path, int seed_override) {
    RunConfig cfg = RunConfig::load_file(path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    return cfg;
}

std::string rng_state_string(std::uint64_t seed) {
    std::ostringstream oss;
    oss << make_rng(seed);
    return oss.str();
}

int run_gen_toy(const RunConfig& cfg, const std::string& out) {
    write_toy_tree(cfg, out);
    std::cout << "toy dataset written under " << out << "\n";
    return 0;
}

int run_train_prompts(const RunConfig& cfg, const std::string& out) {
    Model model = Model::build(cfg);
    auto [a, b] = load_datasets(cfg);
    train_prompts(a, b, *model.backend, *model.bank, model.tmpl,
                  dpg_options(cfg, (fs::path(out) / "dpg_log.csv").string()));
    save_checkpoint(make_prompt_checkpoint(model),
                    (fs::path(out) / "prompt_bank.ckpt").string());
    std::cout << "prompt bank saved to " << (fs::path(out) / "prompt_bank.ckpt").string()
              << "\n";
    return 0;
}

int run_train(const RunConfig& cfg, const std::string& out) {
    Model model = Model::build(cfg);
    fs::path bank_path = fs::path(out) / "prompt_bank.ckpt";
    if (cfg.use_text_prior) {
        if (!fs::exists(bank_path))
            throw std::runtime_error("missing prompt bank: " + bank_path.string() +
                                     " (run train-prompts first)");
        apply_prompt_checkpoint(model, load_checkpoint(bank_path.string()));
    }
    auto [a, b] = load_datasets(cfg);
    TpdpResult result = train_tpdp(a, b, *model.backend, *model.bank, model.tmpl,
                                   *model.phase, *model.fusion, *model.synergy,
                                   tpdp_options(cfg, (fs::path(out) / "tpdp_log.csv").string()));
    model.prototypes = result.prototypes;
    save_checkpoint(make_checkpoint(model, rng_state_string(cfg.seed)),
                    (fs::path(out) / "checkpoint.ckpt").string());
    std::cout << "checkpoint saved to " << (fs::path(out) / "checkpoint.ckpt").string()
              << "\n";
    return 0;
}

int run_eval(const RunConfig& cfg, const std::string& out) {
    fs::path ckpt_path = fs::path(out) / "checkpoint.ckpt";
    if (!fs::exists(ckpt_path))
        throw std::runtime_error("missing checkpoint for eval: " + ckpt_path.string());
    Model model = Model::build(cfg);
    apply_checkpoint(model, load_checkpoint(ckpt_path.string()));
    auto [a, b] = load_datasets(cfg);
    MetricsTable table = evaluate_model(model, a, b);
    table.write_csv((fs::path(out) / "metrics.csv").string());
    std::cout << table.to_text();
    return 0;
}

int run_export_phase(const RunConfig& cfg, const std::string& out) {
    auto [a, b] = load_datasets(cfg);
    fs::path dir = fs::path(out) / "phase";
    for (const DomainDataset* ds : {&a, &b}) {
        fs::path ddir = dir / ("domain" + std::to_string(ds->domain_id));
        fs::create_directories(ddir);
        int i = 0;
        for (const auto& s : ds->samples) {
            PhaseImage ph = phase_only_reconstruct(to_grayscale(s), cfg.amplitude,
                                                   s.sample_id);
            std::ostringstream name;
            name << std::setw(4) << std::setfill('0') << i++ << ".png";
            save_gray_png(ph.values, (ddir / name.str()).string());
        }
    }
    std::cout << "phase images written under " << dir.string() << "\n";
    return 0;
}

int run_plot(const RunConfig& cfg, const std::string& out) {
    fs::path ckpt_path = fs::path(out) / "checkpoint.ckpt";
    if (!fs::exists(ckpt_path))
        throw std::runtime_error("missing checkpoint for plot-embeddings: " +
                                 ckpt_path.string());
    Model model = Model::build(cfg);
    apply_checkpoint(model, load_checkpoint(ckpt_path.string()));
    auto [a, b] = load_datasets(cfg);
    write_embedding_plot(model, a, b, (fs::path(out) / "embeddings.svg").string());
    std::cout << "embedding plot written to "
              << (fs::path(out) / "embeddings.svg").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TPSNet: unsupervised cross-domain image retrieval"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir = ".";
    int seed_override = -1;
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--seed", seed_override, "override the config seed");
    app.add_option("--out", out_dir, "output directory");

    auto* gen_toy = app.add_subcommand("gen-toy", "write a synthetic two-domain dataset");
    auto* train_prompts_cmd = app.add_subcommand("train-prompts", "tune the domain prompt bank");
    auto* train_cmd = app.add_subcommand("train", "train the dual-prior network");
    auto* eval_cmd = app.add_subcommand("eval", "cross-domain retrieval metrics");
    auto* export_phase = app.add_subcommand("export-phase", "write phase-only reconstructions");
    auto* plot_cmd = app.add_subcommand("plot-embeddings", "2-D embedding scatter (SVG)");

    CLI11_PARSE(app, argc, argv);

    (void)thread_cap();  // parallelism cap; current pipeline is sequential

    RunConfig cfg;
    try {
        cfg = load_config(config_path, seed_override);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    try {
        fs::create_directories(out_dir);
        if (gen_toy->parsed()) return run_gen_toy(cfg, out_dir);
        if (train_prompts_cmd->parsed()) return run_train_prompts(cfg, out_dir);
        if (train_cmd->parsed()) return run_train(cfg, out_dir);
        if (eval_cmd->parsed()) return run_eval(cfg, out_dir);
        if (export_phase->parsed()) return run_export_phase(cfg, out_dir);
        if (plot_cmd->parsed()) return run_plot(cfg, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
