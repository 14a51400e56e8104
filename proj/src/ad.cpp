#include "tpsnet/ad.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace tpsnet::ad {

namespace {

Var make_node(Eigen::MatrixXd value, std::vector<Var> inputs,
              std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& in : inputs)
        if (in->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->inputs = std::move(inputs);
        n->backprop = std::move(backprop);
        for (auto& in : n->inputs) in->ensure_grad();
    }
    return n;
}

}  // namespace

Var constant(Eigen::MatrixXd v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    return n;
}

Var leaf(Eigen::MatrixXd v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = true;
    n->ensure_grad();
    return n;
}

void backward(const Var& root) {
    if (root->value.rows() != 1 || root->value.cols() != 1)
        throw std::invalid_argument("backward: root must be a 1x1 scalar");
    // Iterative post-order topological sort.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second)
                stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad(0, 0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

Var add(const Var& a, const Var& b) {
    return make_node(a->value + b->value, {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->grad += n.grad;
        if (b->requires_grad) b->grad += n.grad;
    });
}

Var sub(const Var& a, const Var& b) {
    return make_node(a->value - b->value, {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->grad += n.grad;
        if (b->requires_grad) b->grad -= n.grad;
    });
}

Var scale(const Var& a, double s) {
    return make_node(a->value * s, {a}, [a, s](Node& n) {
        a->grad += n.grad * s;
    });
}

Var matmul(const Var& a, const Var& b) {
    return make_node(a->value * b->value, {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->grad += n.grad * b->value.transpose();
        if (b->requires_grad) b->grad += a->value.transpose() * n.grad;
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    return make_node(a->value * b->value.transpose(), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->grad += n.grad * b->value;
        if (b->requires_grad) b->grad += n.grad.transpose() * a->value;
    });
}

Var transpose(const Var& a) {
    return make_node(a->value.transpose(), {a}, [a](Node& n) {
        a->grad += n.grad.transpose();
    });
}

Var add_rowvec(const Var& a, const Var& bias) {
    if (bias->value.rows() != 1 || bias->value.cols() != a->value.cols())
        throw std::invalid_argument("add_rowvec: bias shape mismatch");
    Eigen::MatrixXd out = a->value.rowwise() + bias->value.row(0);
    return make_node(std::move(out), {a, bias}, [a, bias](Node& n) {
        if (a->requires_grad) a->grad += n.grad;
        if (bias->requires_grad) bias->grad.row(0) += n.grad.colwise().sum();
    });
}

Var relu(const Var& a) {
    return make_node(a->value.cwiseMax(0.0), {a}, [a](Node& n) {
        a->grad += (a->value.array() > 0.0).cast<double>().matrix().cwiseProduct(n.grad);
    });
}

Var tanh_act(const Var& a) {
    Eigen::MatrixXd out = a->value.array().tanh();
    return make_node(out, {a}, [a, out](Node& n) {
        a->grad += ((1.0 - out.array().square()) * n.grad.array()).matrix();
    });
}

Var softmax_rows(const Var& a) {
    Eigen::MatrixXd out = a->value;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double m = out.row(i).maxCoeff();
        out.row(i) = (out.row(i).array() - m).exp();
        out.row(i) /= out.row(i).sum();
    }
    return make_node(out, {a}, [a, out](Node& n) {
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            double dot = n.grad.row(i).cwiseProduct(out.row(i)).sum();
            a->grad.row(i) += (n.grad.row(i).array() - dot).matrix().cwiseProduct(out.row(i));
        }
    });
}

Var logsumexp_rows(const Var& a) {
    Eigen::MatrixXd out(a->value.rows(), 1);
    for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
        double m = a->value.row(i).maxCoeff();
        out(i, 0) = m + std::log((a->value.row(i).array() - m).exp().sum());
    }
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
            double m = a->value.row(i).maxCoeff();
            Eigen::ArrayXXd e = (a->value.row(i).array() - m).exp();
            a->grad.row(i) += (n.grad(i, 0) * e / e.sum()).matrix();
        }
    });
}

Var gather_rows(const Var& a, std::vector<int> idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), a->value.cols());
    for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a->value.row(idx[i]);
    return make_node(std::move(out), {a}, [a, idx = std::move(idx)](Node& n) {
        for (size_t i = 0; i < idx.size(); ++i)
            a->grad.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
    Eigen::Index d = rows[0]->value.cols();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), d);
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i]->value.rows() != 1 || rows[i]->value.cols() != d)
            throw std::invalid_argument("stack_rows: rows must be 1 x d");
        out.row(static_cast<Eigen::Index>(i)) = rows[i]->value;
    }
    std::vector<Var> inputs(rows.begin(), rows.end());
    return make_node(std::move(out), inputs, [inputs](Node& n) {
        for (size_t i = 0; i < inputs.size(); ++i)
            if (inputs[i]->requires_grad)
                inputs[i]->grad += n.grad.row(static_cast<Eigen::Index>(i));
    });
}

Var mean_rows(const Var& a) {
    Eigen::MatrixXd out = a->value.colwise().mean();
    double inv = 1.0 / static_cast<double>(a->value.rows());
    return make_node(std::move(out), {a}, [a, inv](Node& n) {
        a->grad += (n.grad.row(0) * inv).colwise().replicate(a->value.rows());
    });
}

Var weighted_sum(const Var& a, Eigen::MatrixXd w) {
    if (w.rows() != a->value.rows() || w.cols() != a->value.cols())
        throw std::invalid_argument("weighted_sum: weight shape mismatch");
    Eigen::MatrixXd out(1, 1);
    out(0, 0) = a->value.cwiseProduct(w).sum();
    return make_node(std::move(out), {a}, [a, w = std::move(w)](Node& n) {
        a->grad += n.grad(0, 0) * w;
    });
}

Var reshape_row(const Var& a) {
    Eigen::Index r = a->value.rows(), c = a->value.cols();
    Eigen::MatrixXd out(1, r * c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) out(0, i * c + j) = a->value(i, j);
    return make_node(std::move(out), {a}, [a, r, c](Node& n) {
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) a->grad(i, j) += n.grad(0, i * c + j);
    });
}

Var l2_normalize_rows(const Var& a) {
    Eigen::MatrixXd out = a->value;
    Eigen::VectorXd norms(a->value.rows());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double nrm = out.row(i).norm();
        if (nrm < 1e-300) throw std::domain_error("l2_normalize_rows: zero-norm row");
        norms(i) = nrm;
        out.row(i) /= nrm;
    }
    return make_node(std::move(out), {a}, [a, norms](Node& n) {
        for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
            double nrm = norms(i);
            Eigen::RowVectorXd y = a->value.row(i) / nrm;
            double dot = n.grad.row(i).cwiseProduct(y).sum();
            a->grad.row(i) += (n.grad.row(i) - dot * y) / nrm;
        }
    });
}

Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta, double eps) {
    Eigen::Index cols = a->value.cols();
    if (gamma->value.cols() != cols || beta->value.cols() != cols)
        throw std::invalid_argument("layer_norm_rows: parameter shape mismatch");
    Eigen::MatrixXd xhat(a->value.rows(), cols);
    Eigen::VectorXd inv_std(a->value.rows());
    for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
        double mu = a->value.row(i).mean();
        double var = (a->value.row(i).array() - mu).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (a->value.row(i).array() - mu) * inv_std(i);
    }
    Eigen::MatrixXd out = xhat;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        out.row(i) = out.row(i).cwiseProduct(gamma->value.row(0)) + beta->value.row(0);
    return make_node(std::move(out), {a, gamma, beta},
                     [a, gamma, beta, xhat, inv_std](Node& n) {
        Eigen::Index cols = a->value.cols();
        for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
            Eigen::RowVectorXd dxhat = n.grad.row(i).cwiseProduct(gamma->value.row(0));
            double mean_dx = dxhat.mean();
            double mean_dx_xhat = dxhat.cwiseProduct(xhat.row(i)).mean();
            if (a->requires_grad)
                a->grad.row(i) += inv_std(i) *
                    (dxhat.array() - mean_dx - xhat.row(i).array() * mean_dx_xhat).matrix();
            if (gamma->requires_grad)
                gamma->grad.row(0) += n.grad.row(i).cwiseProduct(xhat.row(i));
            if (beta->requires_grad) beta->grad.row(0) += n.grad.row(i);
        }
        (void)cols;
    });
}

Var channel_norm(const Var& a, const Var& gamma, const Var& beta, double eps) {
    Eigen::Index rows = a->value.rows();
    if (gamma->value.rows() != rows || beta->value.rows() != rows)
        throw std::invalid_argument("channel_norm: parameter shape mismatch");
    Eigen::MatrixXd xhat(rows, a->value.cols());
    Eigen::VectorXd inv_std(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double mu = a->value.row(i).mean();
        double var = (a->value.row(i).array() - mu).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (a->value.row(i).array() - mu) * inv_std(i);
    }
    Eigen::MatrixXd out(rows, a->value.cols());
    for (Eigen::Index i = 0; i < rows; ++i)
        out.row(i) = gamma->value(i, 0) * xhat.row(i).array() + beta->value(i, 0);
    return make_node(std::move(out), {a, gamma, beta},
                     [a, gamma, beta, xhat, inv_std](Node& n) {
        for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
            Eigen::RowVectorXd dxhat = n.grad.row(i) * gamma->value(i, 0);
            double mean_dx = dxhat.mean();
            double mean_dx_xhat = dxhat.cwiseProduct(xhat.row(i)).mean();
            if (a->requires_grad)
                a->grad.row(i) += inv_std(i) *
                    (dxhat.array() - mean_dx - xhat.row(i).array() * mean_dx_xhat).matrix();
            if (gamma->requires_grad)
                gamma->grad(i, 0) += n.grad.row(i).cwiseProduct(xhat.row(i)).sum();
            if (beta->requires_grad) beta->grad(i, 0) += n.grad.row(i).sum();
        }
    });
}

Var channel_affine(const Var& a, const Eigen::VectorXd& mean,
                   const Eigen::VectorXd& var, const Var& gamma,
                   const Var& beta, double eps) {
    Eigen::Index rows = a->value.rows();
    Eigen::VectorXd inv_std = (var.array() + eps).sqrt().inverse();
    Eigen::MatrixXd out(rows, a->value.cols());
    for (Eigen::Index i = 0; i < rows; ++i)
        out.row(i) = gamma->value(i, 0) * inv_std(i) * (a->value.row(i).array() - mean(i)) +
                     beta->value(i, 0);
    return make_node(std::move(out), {a, gamma, beta},
                     [a, gamma, beta, mean, inv_std](Node& n) {
        for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
            if (a->requires_grad)
                a->grad.row(i) += n.grad.row(i) * gamma->value(i, 0) * inv_std(i);
            if (gamma->requires_grad)
                gamma->grad(i, 0) += (n.grad.row(i).array() *
                    (a->value.row(i).array() - mean(i)) * inv_std(i)).sum();
            if (beta->requires_grad) beta->grad(i, 0) += n.grad.row(i).sum();
        }
    });
}

Var conv3x3(const Var& input, const Var& weights, const Var& bias,
            int height, int width) {
    Eigen::Index c_in = input->value.rows();
    Eigen::Index c_out = weights->value.rows();
    if (input->value.cols() != static_cast<Eigen::Index>(height) * width)
        throw std::invalid_argument("conv3x3: input spatial size mismatch");
    if (weights->value.cols() != c_in * 9)
        throw std::invalid_argument("conv3x3: weight shape mismatch");
    Eigen::MatrixXd out(c_out, height * width);
    for (Eigen::Index co = 0; co < c_out; ++co) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double acc = bias->value(co, 0);
                for (Eigen::Index ci = 0; ci < c_in; ++ci)
                    for (int dy = -1; dy <= 1; ++dy) {
                        int yy = y + dy;
                        if (yy < 0 || yy >= height) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            int xx = x + dx;
                            if (xx < 0 || xx >= width) continue;
                            acc += weights->value(co, ci * 9 + (dy + 1) * 3 + (dx + 1)) *
                                   input->value(ci, yy * width + xx);
                        }
                    }
                out(co, y * width + x) = acc;
            }
        }
    }
    return make_node(std::move(out), {input, weights, bias},
                     [input, weights, bias, height, width](Node& n) {
        Eigen::Index c_in = input->value.rows();
        Eigen::Index c_out = weights->value.rows();
        for (Eigen::Index co = 0; co < c_out; ++co) {
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    double g = n.grad(co, y * width + x);
                    if (g == 0.0) continue;
                    if (bias->requires_grad) bias->grad(co, 0) += g;
                    for (Eigen::Index ci = 0; ci < c_in; ++ci)
                        for (int dy = -1; dy <= 1; ++dy) {
                            int yy = y + dy;
                            if (yy < 0 || yy >= height) continue;
                            for (int dx = -1; dx <= 1; ++dx) {
                                int xx = x + dx;
                                if (xx < 0 || xx >= width) continue;
                                Eigen::Index k = ci * 9 + (dy + 1) * 3 + (dx + 1);
                                if (weights->requires_grad)
                                    weights->grad(co, k) += g * input->value(ci, yy * width + xx);
                                if (input->requires_grad)
                                    input->grad(ci, yy * width + xx) += g * weights->value(co, k);
                            }
                        }
                }
            }
        }
    });
}

Var avgpool2x2(const Var& input, int height, int width) {
    if (height % 2 != 0 || width % 2 != 0)
        throw std::invalid_argument("avgpool2x2: spatial size must be even");
    Eigen::Index c = input->value.rows();
    int oh = height / 2, ow = width / 2;
    Eigen::MatrixXd out(c, oh * ow);
    for (Eigen::Index ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                out(ci, y * ow + x) = 0.25 *
                    (input->value(ci, (2 * y) * width + 2 * x) +
                     input->value(ci, (2 * y) * width + 2 * x + 1) +
                     input->value(ci, (2 * y + 1) * width + 2 * x) +
                     input->value(ci, (2 * y + 1) * width + 2 * x + 1));
    return make_node(std::move(out), {input}, [input, height, width](Node& n) {
        int oh = height / 2, ow = width / 2;
        for (Eigen::Index ci = 0; ci < input->value.rows(); ++ci)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    double g = 0.25 * n.grad(ci, y * ow + x);
                    input->grad(ci, (2 * y) * width + 2 * x) += g;
                    input->grad(ci, (2 * y) * width + 2 * x + 1) += g;
                    input->grad(ci, (2 * y + 1) * width + 2 * x) += g;
                    input->grad(ci, (2 * y + 1) * width + 2 * x + 1) += g;
                }
    });
}

}  // namespace tpsnet::ad
