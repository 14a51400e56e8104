#include "tpsnet/params.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tpsnet {

ParamGroup group_of(const std::string& name) {
    if (name.rfind("prompt_tokens/", 0) == 0) return ParamGroup::kPromptTokens;
    if (name.find("last_block") != std::string::npos) return ParamGroup::kImageLastBlock;
    if (name.rfind("phase/", 0) == 0 || name.rfind("fusion/", 0) == 0 ||
        name.rfind("synergy/", 0) == 0)
        return ParamGroup::kFusionHeads;
    return ParamGroup::kFrozen;
}

ad::Var ParamStore::add(const std::string& name, Eigen::MatrixXd init) {
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    Param p;
    p.var = ad::leaf(std::move(init));
    p.adam_m = Eigen::MatrixXd::Zero(p.var->value.rows(), p.var->value.cols());
    p.adam_v = p.adam_m;
    auto [it, ok] = params_.emplace(name, std::move(p));
    (void)ok;
    order_.push_back(name);
    return it->second.var;
}

ad::Var ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second.var;
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) > 0; }

void ParamStore::set_value(const std::string& name, const Eigen::MatrixXd& v) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    if (v.rows() != it->second.var->value.rows() || v.cols() != it->second.var->value.cols())
        throw std::invalid_argument("parameter shape mismatch: " + name);
    it->second.var->value = v;
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : params_) p.var->zero_grad();
}

std::map<std::string, Eigen::MatrixXd> ParamStore::snapshot() const {
    std::map<std::string, Eigen::MatrixXd> out;
    for (const auto& [name, p] : params_) out.emplace(name, p.var->value);
    return out;
}

double AdamOptimizer::current_lr() const {
    if (!cfg_.cosine_decay) return cfg_.lr;
    double frac = cfg_.total_steps > 0
        ? static_cast<double>(t_) / static_cast<double>(cfg_.total_steps) : 0.0;
    if (frac > 1.0) frac = 1.0;
    return cfg_.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void AdamOptimizer::step() {
    double lr = current_lr();
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (const auto& name : store_.order_) {
        if (!active_.count(group_of(name))) continue;
        Param& p = store_.params_.at(name);
        p.var->ensure_grad();
        const Eigen::MatrixXd& g = p.var->grad;
        p.adam_m = cfg_.beta1 * p.adam_m + (1.0 - cfg_.beta1) * g;
        p.adam_v = cfg_.beta2 * p.adam_v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        Eigen::MatrixXd mhat = p.adam_m / bc1;
        Eigen::MatrixXd vhat = p.adam_v / bc2;
        p.var->value -= lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
    }
}

}  // namespace tpsnet
