#include "tpsnet/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

#include "tpsnet/rng.hpp"

namespace tpsnet {

namespace {
// FFTW planning is not thread-safe; execution of a private plan is.
std::mutex g_fftw_mutex;
}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> phase_only_reconstruct_raw(
    const Eigen::MatrixXd& gray, double amplitude) {
    if (amplitude == 0.0) throw std::invalid_argument("degenerate amplitude: R must be nonzero");
    if (!gray.allFinite()) throw std::invalid_argument("phase_only_reconstruct: non-finite input");
    const int h = static_cast<int>(gray.rows());
    const int w = static_cast<int>(gray.cols());
    if (h < 2 || w < 2) throw std::invalid_argument("phase_only_reconstruct: image too small");

    fftw_complex* in = fftw_alloc_complex(static_cast<size_t>(h) * w);
    fftw_complex* out = fftw_alloc_complex(static_cast<size_t>(h) * w);
    fftw_plan fwd, bwd;
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fwd = fftw_plan_dft_2d(h, w, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_2d(h, w, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            in[y * w + x][0] = gray(y, x);
            in[y * w + x][1] = 0.0;
        }
    fftw_execute(fwd);
    // Keep the phase, flatten the amplitude to R. atan2(0,0) = 0, which
    // fixes the phase of zero-magnitude bins.
    for (int i = 0; i < h * w; ++i) {
        double phi = std::atan2(out[i][1], out[i][0]);
        in[i][0] = amplitude * std::cos(phi);
        in[i][1] = amplitude * std::sin(phi);
    }
    fftw_execute(bwd);
    double inv_n = 1.0 / (static_cast<double>(h) * w);
    Eigen::MatrixXd re(h, w), im(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            re(y, x) = out[y * w + x][0] * inv_n;
            im(y, x) = out[y * w + x][1] * inv_n;
        }
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    fftw_free(in);
    fftw_free(out);
    return {std::move(re), std::move(im)};
}

Eigen::MatrixXd min_max_normalize(const Eigen::MatrixXd& m) {
    double lo = m.minCoeff(), hi = m.maxCoeff();
    if (hi - lo <= 0.0) return Eigen::MatrixXd::Zero(m.rows(), m.cols());
    return ((m.array() - lo) / (hi - lo)).matrix();
}

PhaseImage phase_only_reconstruct(const Eigen::MatrixXd& gray, double amplitude,
                                  const std::string& source_id) {
    auto [re, im] = phase_only_reconstruct_raw(gray, amplitude);
    (void)im;  // real input => reconstruction is real up to roundoff
    PhaseImage out;
    out.values = min_max_normalize(re);
    out.source_id = source_id;
    return out;
}

PhaseEncoder::PhaseEncoder(ParamStore& store, int image_size, int embed_dim,
                           std::uint64_t seed)
    : store_(store), image_size_(image_size), embed_dim_(embed_dim) {
    if (image_size % 4 != 0)
        throw std::invalid_argument("PhaseEncoder: image size must be divisible by 4");
    auto rng = make_rng(mix_seed(seed, 0x9a5eULL));
    int flat = 32 * (image_size / 4) * (image_size / 4);
    store.add("phase/conv1/w", random_normal(rng, 16, 9, std::sqrt(2.0 / 9.0)));
    store.add("phase/conv1/b", Eigen::MatrixXd::Zero(16, 1));
    store.add("phase/bn1/gamma", Eigen::MatrixXd::Ones(16, 1));
    store.add("phase/bn1/beta", Eigen::MatrixXd::Zero(16, 1));
    store.add("phase/conv2/w", random_normal(rng, 32, 16 * 9, std::sqrt(2.0 / (16.0 * 9.0))));
    store.add("phase/conv2/b", Eigen::MatrixXd::Zero(32, 1));
    store.add("phase/bn2/gamma", Eigen::MatrixXd::Ones(32, 1));
    store.add("phase/bn2/beta", Eigen::MatrixXd::Zero(32, 1));
    store.add("phase/fc/w", random_normal(rng, flat, embed_dim, std::sqrt(1.0 / flat)));
    store.add("phase/fc/b", Eigen::MatrixXd::Zero(1, embed_dim));
    bn1_mean = Eigen::VectorXd::Zero(16);
    bn1_var = Eigen::VectorXd::Ones(16);
    bn2_mean = Eigen::VectorXd::Zero(32);
    bn2_var = Eigen::VectorXd::Ones(32);
}

ad::Var PhaseEncoder::encode(const PhaseImage& phase_image, bool training) {
    const int h = static_cast<int>(phase_image.values.rows());
    const int w = static_cast<int>(phase_image.values.cols());
    if (h % 4 != 0 || w % 4 != 0)
        throw std::invalid_argument("encode_phase: spatial size not divisible by 4");
    if (!phase_image.values.allFinite())
        throw std::invalid_argument("encode_phase: non-finite phase image");

    Eigen::MatrixXd flat_in(1, h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) flat_in(0, y * w + x) = phase_image.values(y, x);
    ad::Var x = ad::constant(std::move(flat_in));

    auto block = [&](ad::Var inp, const std::string& prefix, int& hh, int& ww,
                     Eigen::VectorXd& run_mean, Eigen::VectorXd& run_var) {
        ad::Var c = ad::conv3x3(inp, store_.get(prefix + "/w"),
                                store_.get(prefix + "/b"), hh, ww);
        std::string bn = prefix == "phase/conv1" ? "phase/bn1" : "phase/bn2";
        ad::Var normed;
        if (training) {
            // Track channel statistics for inference mode.
            for (Eigen::Index i = 0; i < c->value.rows(); ++i) {
                double mu = c->value.row(i).mean();
                double var = (c->value.row(i).array() - mu).square().mean();
                run_mean(i) = 0.9 * run_mean(i) + 0.1 * mu;
                run_var(i) = 0.9 * run_var(i) + 0.1 * var;
            }
            normed = ad::channel_norm(c, store_.get(bn + "/gamma"), store_.get(bn + "/beta"));
        } else {
            normed = ad::channel_affine(c, run_mean, run_var,
                                        store_.get(bn + "/gamma"), store_.get(bn + "/beta"));
        }
        ad::Var pooled = ad::avgpool2x2(ad::relu(normed), hh, ww);
        hh /= 2;
        ww /= 2;
        return pooled;
    };

    int hh = h, ww = w;
    ad::Var b1 = block(x, "phase/conv1", hh, ww, bn1_mean, bn1_var);
    ad::Var b2 = block(b1, "phase/conv2", hh, ww, bn2_mean, bn2_var);
    ad::Var flat = ad::reshape_row(b2);
    return ad::add_rowvec(ad::matmul(flat, store_.get("phase/fc/w")),
                          store_.get("phase/fc/b"));
}

}  // namespace tpsnet
