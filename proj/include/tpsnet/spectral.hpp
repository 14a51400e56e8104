#pragma once

#include <Eigen/Dense>
#include <string>

#include "tpsnet/ad.hpp"
#include "tpsnet/params.hpp"

namespace tpsnet {

// Min-max-normalized phase-only reconstruction of a grayscale image.
struct PhaseImage {
    Eigen::MatrixXd values;
    std::string source_id;
};

// Keeps the phase spectrum, replaces the amplitude spectrum with the
// constant R, inverse-transforms, takes the real part and min-max
// normalizes. The result is invariant to the choice of R != 0.
PhaseImage phase_only_reconstruct(const Eigen::MatrixXd& gray, double amplitude,
                                  const std::string& source_id = "");

// Raw (pre-normalization) complex reconstruction, exposed for the
// realness checks. Returns real and imaginary parts.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> phase_only_reconstruct_raw(
    const Eigen::MatrixXd& gray, double amplitude);

Eigen::MatrixXd min_max_normalize(const Eigen::MatrixXd& m);

// Two conv blocks AvgPool2x2(ReLU(Norm(Conv3x3))), channels 1->16->32,
// then one fully connected layer down to the embedding dimension.
class PhaseEncoder {
public:
    PhaseEncoder(ParamStore& store, int image_size, int embed_dim,
                 std::uint64_t seed);

    // Differentiable path; `training` selects per-image channel stats
    // versus the frozen running statistics.
    ad::Var encode(const PhaseImage& phase_image, bool training);

    int image_size() const { return image_size_; }
    int embed_dim() const { return embed_dim_; }

    // Running normalization statistics (non-gradient state).
    Eigen::VectorXd bn1_mean, bn1_var, bn2_mean, bn2_var;

private:
    ParamStore& store_;
    int image_size_;
    int embed_dim_;
};

}  // namespace tpsnet
