#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace tpsnet {

struct PseudoLabelAssignment {
    std::vector<int> labels;
    int domain_id = 0;
    int epoch = 0;
};

// Per-domain bank of unit-norm class prototypes with momentum updates.
struct PrototypeBank {
    Eigen::MatrixXd prototypes;  // C x d, unit-norm rows
    double momentum = 0.9;
};

struct KMeansResult {
    PseudoLabelAssignment assignment;
    Eigen::MatrixXd centroids;  // K x d
    double inertia = 0.0;
};

// Deterministic k-means++ followed by Lloyd iterations (shift < 1e-6 or
// 300 rounds); empty clusters are re-seeded from the farthest point.
KMeansResult kmeans_cluster(const Eigen::MatrixXd& features, int k, std::uint64_t seed);

// Prototype c = normalized mean of features with pseudo-label c.
PrototypeBank init_prototypes(const Eigen::MatrixXd& features,
                              const PseudoLabelAssignment& assignment,
                              int num_categories, double momentum);

// P_c <- m P_c + (1-m) feature, then row c re-normalized.
void momentum_update(PrototypeBank& bank, int category,
                     const Eigen::VectorXd& feature, double m);

// Nearest-prototype refresh: label i = argmax_c <f_i, P_c>, ties to the
// lowest index.
PseudoLabelAssignment reassign_by_prototype(const Eigen::MatrixXd& features,
                                            const PrototypeBank& bank);

}  // namespace tpsnet
