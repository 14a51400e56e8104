#include "tpsnet/pseudolabel.hpp"

#include <iostream>
#include <limits>
#include <stdexcept>

#include "tpsnet/rng.hpp"

namespace tpsnet {

namespace {

// Weighted index pick from an explicit cumulative scan; avoids the
// implementation-defined behavior of std::discrete_distribution.
int weighted_pick(const Eigen::VectorXd& weights, std::mt19937_64& rng) {
    double total = weights.sum();
    if (total <= 0.0) {
        std::uniform_int_distribution<int> uni(0, static_cast<int>(weights.size()) - 1);
        return uni(rng);
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng), acc = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        acc += weights(i);
        if (r <= acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

}  // namespace

KMeansResult kmeans_cluster(const Eigen::MatrixXd& features, int k, std::uint64_t seed) {
    const int n = static_cast<int>(features.rows());
    if (k < 1 || n < k) throw std::invalid_argument("kmeans_cluster: need N >= K >= 1");
    auto rng = make_rng(mix_seed(seed, 0x4a3eULL));

    // k-means++ seeding.
    Eigen::MatrixXd centroids(k, features.cols());
    std::uniform_int_distribution<int> uni(0, n - 1);
    centroids.row(0) = features.row(uni(rng));
    Eigen::VectorXd d2 = (features.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        centroids.row(c) = features.row(weighted_pick(d2, rng));
        d2 = d2.cwiseMin((features.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> labels(n, 0);
    double inertia = 0.0;
    for (int iter = 0; iter < 300; ++iter) {
        // Assignment.
        inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                double d = (features.row(i) - centroids.row(c)).squaredNorm();
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            labels[i] = arg;
            inertia += best;
        }
        // Repair empty clusters from the point farthest from its centroid.
        std::vector<int> counts(k, 0);
        for (int l : labels) ++counts[l];
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            double worst = -1.0;
            int arg = 0;
            for (int i = 0; i < n; ++i) {
                if (counts[labels[i]] <= 1) continue;
                double d = (features.row(i) - centroids.row(labels[i])).squaredNorm();
                if (d > worst) {
                    worst = d;
                    arg = i;
                }
            }
            --counts[labels[arg]];
            labels[arg] = c;
            counts[c] = 1;
            centroids.row(c) = features.row(arg);
        }
        // Update.
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, features.cols());
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            next.row(labels[i]) += features.row(i);
            ++counts[labels[i]];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) next.row(c) /= counts[c];
            else next.row(c) = centroids.row(c);
            shift = std::max(shift, (next.row(c) - centroids.row(c)).norm());
        }
        centroids = next;
        if (shift < 1e-6) break;
    }
    // Final assignment against the converged centroids.
    inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::max();
        int arg = 0;
        for (int c = 0; c < k; ++c) {
            double d = (features.row(i) - centroids.row(c)).squaredNorm();
            if (d < best) {
                best = d;
                arg = c;
            }
        }
        labels[i] = arg;
        inertia += best;
    }

    KMeansResult out;
    out.assignment.labels = std::move(labels);
    out.centroids = std::move(centroids);
    out.inertia = inertia;
    return out;
}

PrototypeBank init_prototypes(const Eigen::MatrixXd& features,
                              const PseudoLabelAssignment& assignment,
                              int num_categories, double momentum) {
    if (static_cast<int>(assignment.labels.size()) != features.rows())
        throw std::invalid_argument("init_prototypes: label count mismatch");
    PrototypeBank bank;
    bank.momentum = momentum;
    bank.prototypes = Eigen::MatrixXd::Zero(num_categories, features.cols());
    std::vector<int> counts(num_categories, 0);
    for (size_t i = 0; i < assignment.labels.size(); ++i) {
        int c = assignment.labels[i];
        if (c < 0 || c >= num_categories)
            throw std::invalid_argument("init_prototypes: label out of range");
        bank.prototypes.row(c) += features.row(static_cast<Eigen::Index>(i));
        ++counts[c];
    }
    for (int c = 0; c < num_categories; ++c) {
        if (counts[c] == 0)
            throw std::runtime_error("init_prototypes: class " + std::to_string(c) +
                                     " has no members");
        bank.prototypes.row(c) /= counts[c];
        double nrm = bank.prototypes.row(c).norm();
        if (nrm > 0.0) bank.prototypes.row(c) /= nrm;
    }
    return bank;
}

void momentum_update(PrototypeBank& bank, int category,
                     const Eigen::VectorXd& feature, double m) {
    if (category < 0 || category >= bank.prototypes.rows())
        throw std::out_of_range("momentum_update: category out of range");
    if (m < 0.0 || m > 1.0) throw std::invalid_argument("momentum_update: m must be in [0,1]");
    Eigen::RowVectorXd raw =
        m * bank.prototypes.row(category) + (1.0 - m) * feature.transpose();
    double nrm = raw.norm();
    if (nrm == 0.0) {
        std::cerr << "warning: momentum update produced a zero vector; prototype kept\n";
        return;
    }
    bank.prototypes.row(category) = raw / nrm;
}

PseudoLabelAssignment reassign_by_prototype(const Eigen::MatrixXd& features,
                                            const PrototypeBank& bank) {
    PseudoLabelAssignment out;
    out.labels.resize(static_cast<size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        double best = -std::numeric_limits<double>::max();
        int arg = 0;
        for (Eigen::Index c = 0; c < bank.prototypes.rows(); ++c) {
            double s = features.row(i).dot(bank.prototypes.row(c));
            if (s > best) {  // strict: ties keep the lowest index
                best = s;
                arg = static_cast<int>(c);
            }
        }
        out.labels[static_cast<size_t>(i)] = arg;
    }
    return out;
}

}  // namespace tpsnet
