#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

// Reverse-mode automatic differentiation over dense double matrices.
// Every tensor in the project is a 2-D Eigen matrix; convolutional
// feature maps are stored as (channels, height*width) with the spatial
// extent carried by the op that consumes them.

namespace tpsnet::ad {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    std::vector<Var> inputs;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols())
            grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
    }
    void zero_grad() { grad = Eigen::MatrixXd::Zero(value.rows(), value.cols()); }
};

Var constant(Eigen::MatrixXd v);
Var leaf(Eigen::MatrixXd v);

// Runs backpropagation from a 1x1 scalar root.
void backward(const Var& root);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
// a * b^T without materializing the transpose node.
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add_rowvec(const Var& a, const Var& bias);   // bias is 1 x cols
Var relu(const Var& a);
Var tanh_act(const Var& a);
Var softmax_rows(const Var& a);
Var logsumexp_rows(const Var& a);                // m x n -> m x 1
Var gather_rows(const Var& a, std::vector<int> idx);
Var stack_rows(const std::vector<Var>& rows);    // each 1 x d -> n x d
Var mean_rows(const Var& a);                     // m x d -> 1 x d
Var weighted_sum(const Var& a, Eigen::MatrixXd w);  // sum(a .* w) -> 1 x 1
Var reshape_row(const Var& a);                   // row-major flatten -> 1 x (r*c)
Var l2_normalize_rows(const Var& a);
// Per-row standardization with gamma/beta of shape 1 x cols.
Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta,
                    double eps = 1e-5);
// Per-row (channel) standardization over columns, gamma/beta are rows x 1.
Var channel_norm(const Var& a, const Var& gamma, const Var& beta,
                 double eps = 1e-5);
// Frozen affine form used in inference mode: (a - mean) / sqrt(var+eps) * gamma + beta,
// all of shape rows x 1, applied per channel row.
Var channel_affine(const Var& a, const Eigen::VectorXd& mean,
                   const Eigen::VectorXd& var, const Var& gamma,
                   const Var& beta, double eps = 1e-5);
// 3x3 convolution, stride 1, zero padding 1. Input (c_in, h*w),
// weights (c_out, c_in*9), bias c_out x 1, output (c_out, h*w).
Var conv3x3(const Var& input, const Var& weights, const Var& bias,
            int height, int width);
Var avgpool2x2(const Var& input, int height, int width);

}  // namespace tpsnet::ad
