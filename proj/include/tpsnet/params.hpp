#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tpsnet/ad.hpp"

namespace tpsnet {

// Named parameter groups that can be frozen or trained as a unit.
enum class ParamGroup { kFrozen, kPromptTokens, kImageLastBlock, kFusionHeads };

ParamGroup group_of(const std::string& name);

struct Param {
    ad::Var var;
    Eigen::MatrixXd adam_m;
    Eigen::MatrixXd adam_v;
};

// Ordered registry of all learnable state. Iteration order is the
// registration order, which keeps parameter initialization and
// checkpoint layout deterministic.
class ParamStore {
public:
    ad::Var add(const std::string& name, Eigen::MatrixXd init);
    ad::Var get(const std::string& name) const;
    bool has(const std::string& name) const;
    void set_value(const std::string& name, const Eigen::MatrixXd& v);

    const std::vector<std::string>& names() const { return order_; }
    void zero_grad();

    // Deep snapshot/compare, used by the freeze-contract tests.
    std::map<std::string, Eigen::MatrixXd> snapshot() const;

private:
    std::map<std::string, Param> params_;
    std::vector<std::string> order_;
    friend class AdamOptimizer;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool cosine_decay = true;
    int total_steps = 1;
};

class AdamOptimizer {
public:
    AdamOptimizer(ParamStore& store, AdamConfig cfg, std::set<ParamGroup> active)
        : store_(store), cfg_(cfg), active_(std::move(active)) {}

    // One update over the active groups; gradients must already be populated.
    void step();
    int steps_taken() const { return t_; }
    double current_lr() const;

private:
    ParamStore& store_;
    AdamConfig cfg_;
    std::set<ParamGroup> active_;
    int t_ = 0;
};

}  // namespace tpsnet
