#include "tpsnet/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include "tpsnet/image_io.hpp"
#include "tpsnet/rng.hpp"

namespace fs = std::filesystem;

namespace tpsnet {

bool Image::in_unit_range() const {
    auto ok = [](const Eigen::MatrixXd& m) {
        return m.minCoeff() >= 0.0 && m.maxCoeff() <= 1.0;
    };
    return ok(r) && ok(g) && ok(b);
}

namespace {
std::atomic<int> g_guard_depth{0};
}

LabelAccessGuard::LabelAccessGuard() { ++g_guard_depth; }
LabelAccessGuard::~LabelAccessGuard() { --g_guard_depth; }
bool LabelAccessGuard::active() { return g_guard_depth.load() > 0; }

int ImageSample::eval_label() const {
    if (LabelAccessGuard::active())
        throw std::logic_error("ground-truth label read inside a training code path");
    if (!true_label_)
        throw std::logic_error("sample has no ground-truth label: " + sample_id);
    return *true_label_;
}

DomainDataset load_domain_directory(const std::string& root_path, int domain_id) {
    if (!fs::is_directory(root_path))
        throw std::runtime_error("dataset root does not exist: " + root_path);
    std::vector<fs::path> categories;
    for (const auto& e : fs::directory_iterator(root_path))
        if (e.is_directory()) categories.push_back(e.path());
    std::sort(categories.begin(), categories.end());
    if (categories.empty())
        throw std::runtime_error("no category directories under: " + root_path);

    DomainDataset ds;
    ds.domain_id = domain_id;
    int label = 0;
    for (const auto& cat : categories) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(cat))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            std::cerr << "warning: empty category folder skipped: " << cat << "\n";
            continue;
        }
        for (const auto& f : files) {
            ImageSample s;
            s.pixels = load_image_file(f.string());
            s.domain_id = domain_id;
            s.sample_id = cat.filename().string() + "/" + f.filename().string();
            s.set_label(label);
            ds.samples.push_back(std::move(s));
        }
        ++label;
    }
    ds.num_categories = label;
    if (ds.num_categories == 0)
        throw std::runtime_error("no category directories under: " + root_path);
    return ds;
}

namespace {

struct Vec2 {
    double x, y;
};

// Vertex list for the shape family; class ids beyond the fixed list
// fall back to regular polygons with increasing side counts.
std::vector<Vec2> shape_vertices(int class_id, double radius, double rot) {
    auto ngon = [&](int n, double r0, double phase) {
        std::vector<Vec2> v;
        for (int i = 0; i < n; ++i) {
            double a = rot + phase + 2.0 * std::numbers::pi * i / n;
            v.push_back({r0 * std::cos(a), r0 * std::sin(a)});
        }
        return v;
    };
    switch (class_id) {
        case 1: return ngon(4, radius, std::numbers::pi / 4.0);  // square
        case 2: return ngon(3, radius, -std::numbers::pi / 2.0); // triangle
        case 3: {  // five-point star
            std::vector<Vec2> v;
            for (int i = 0; i < 10; ++i) {
                double r0 = (i % 2 == 0) ? radius : 0.45 * radius;
                double a = rot - std::numbers::pi / 2.0 + std::numbers::pi * i / 5.0;
                v.push_back({r0 * std::cos(a), r0 * std::sin(a)});
            }
            return v;
        }
        case 4: {  // plus sign
            double w = 0.38 * radius, r0 = radius;
            std::vector<Vec2> raw = {{w, w}, {r0, w}, {r0, -w}, {w, -w}, {w, -r0},
                                     {-w, -r0}, {-w, -w}, {-r0, -w}, {-r0, w}, {-w, w},
                                     {-w, r0}, {w, r0}};
            double c = std::cos(rot), s = std::sin(rot);
            for (auto& p : raw) p = {c * p.x - s * p.y, s * p.x + c * p.y};
            return raw;
        }
        default: return ngon(3 + class_id, radius, 0.0);
    }
}

// Signed distance to a simple polygon (negative inside).
double polygon_sdf(const std::vector<Vec2>& v, double px, double py) {
    double d2 = std::numeric_limits<double>::max();
    int winding = 0;
    size_t n = v.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        double ex = v[j].x - v[i].x, ey = v[j].y - v[i].y;
        double wx = px - v[i].x, wy = py - v[i].y;
        double t = std::clamp((wx * ex + wy * ey) / (ex * ex + ey * ey), 0.0, 1.0);
        double dx = wx - ex * t, dy = wy - ey * t;
        d2 = std::min(d2, dx * dx + dy * dy);
        bool c1 = v[i].y <= py, c2 = v[j].y > py;
        double cross = ex * wy - ey * wx;
        if (c1 && c2 && cross > 0) ++winding;
        if (!c1 && !c2 && cross < 0) --winding;
    }
    double d = std::sqrt(d2);
    return winding != 0 ? -d : d;
}

double shape_sdf(int class_id, const std::vector<Vec2>& verts, double radius,
                 double px, double py) {
    if (class_id % 8 == 0 && class_id < 8)  // disk
        return std::sqrt(px * px + py * py) - radius;
    return polygon_sdf(verts, px, py);
}

void separable_blur(Eigen::MatrixXd& m) {
    // 5-tap Gaussian, sigma ~ 0.9.
    const double k[5] = {0.0614, 0.2448, 0.3877, 0.2448, 0.0614};
    Eigen::MatrixXd tmp = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    for (Eigen::Index y = 0; y < m.rows(); ++y)
        for (Eigen::Index x = 0; x < m.cols(); ++x) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t) {
                Eigen::Index xx = std::clamp<Eigen::Index>(x + t, 0, m.cols() - 1);
                acc += k[t + 2] * m(y, xx);
            }
            tmp(y, x) = acc;
        }
    for (Eigen::Index y = 0; y < m.rows(); ++y)
        for (Eigen::Index x = 0; x < m.cols(); ++x) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t) {
                Eigen::Index yy = std::clamp<Eigen::Index>(y + t, 0, m.rows() - 1);
                acc += k[t + 2] * tmp(yy, x);
            }
            m(y, x) = acc;
        }
}

ImageSample render_toy_sample(int class_id, int domain_id, int index,
                              int image_size, std::uint64_t seed) {
    auto rng = make_rng(mix_seed(seed, (static_cast<std::uint64_t>(domain_id) << 40) ^
                                       (static_cast<std::uint64_t>(class_id) << 20) ^
                                       static_cast<std::uint64_t>(index)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    double s = static_cast<double>(image_size);
    double cx = s / 2.0 + (uni(rng) - 0.5) * 0.12 * s;
    double cy = s / 2.0 + (uni(rng) - 0.5) * 0.12 * s;
    double radius = s * (0.28 + 0.08 * uni(rng));
    double rot = (uni(rng) - 0.5) * 0.5;
    auto verts = shape_vertices(class_id, radius, rot);

    Image img;
    img.r = Eigen::MatrixXd::Zero(image_size, image_size);
    img.g = img.r;
    img.b = img.r;

    double bg = 0.06 + 0.05 * uni(rng);
    double fr = 0.60 + 0.30 * uni(rng);
    double fg = 0.60 + 0.30 * uni(rng);
    double fb = 0.60 + 0.30 * uni(rng);
    double stroke = 0.5 + 0.15 * uni(rng);  // half thickness in pixels
    double edge_lum = 0.58 + 0.08 * uni(rng);
    double shade_lum = 0.74 + 0.10 * uni(rng);  // sketch interior hatching

    // Class-specific interior texture: a grating whose orientation is a
    // class attribute shared by both renderings of the shape family.
    double grat_theta = std::numbers::pi * class_id / 5.0 + (uni(rng) - 0.5) * 0.06;
    double grat_freq = 2.0 * std::numbers::pi * 5.0 / s;
    // Anchored at the shape center so the texture stays registered
    // across samples; only a small jitter.
    double grat_phase = (uni(rng) - 0.5) * 0.3;
    double gc = std::cos(grat_theta), gs = std::sin(grat_theta);

    for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x) {
            double d = shape_sdf(class_id, verts, radius, x + 0.5 - cx, y + 0.5 - cy);
            double grating = 0.5 + 0.5 * std::sin(grat_freq * (gc * (x - cx) +
                                                              gs * (y - cy)) + grat_phase);
            if (domain_id == 0) {
                double a = std::clamp(0.5 - d, 0.0, 1.0);
                double tex = 0.45 + 0.55 * grating;
                img.r(y, x) = bg * (1 - a) + fr * tex * a;
                img.g(y, x) = bg * (1 - a) + fg * tex * a;
                img.b(y, x) = bg * (1 - a) + fb * tex * a;
            } else {
                double a_edge = std::clamp(stroke + 0.5 - std::abs(d), 0.0, 1.0);
                double a_fill = std::clamp(0.5 - d, 0.0, 1.0);
                double v = bg * (1 - a_fill) + shade_lum * (0.05 + 0.95 * grating) * a_fill;
                v = std::max(v, bg * (1 - a_edge) + edge_lum * a_edge);
                img.r(y, x) = v;
                img.g(y, x) = v;
                img.b(y, x) = v;
            }
        }
    separable_blur(img.r);
    separable_blur(img.g);
    separable_blur(img.b);
    // Mild pixel noise.
    for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x) {
            double n = (uni(rng) - 0.5) * 0.03;
            img.r(y, x) = std::clamp(img.r(y, x) + n, 0.0, 1.0);
            img.g(y, x) = std::clamp(img.g(y, x) + n, 0.0, 1.0);
            img.b(y, x) = std::clamp(img.b(y, x) + n, 0.0, 1.0);
        }

    ImageSample sample;
    sample.pixels = std::move(img);
    sample.domain_id = domain_id;
    sample.sample_id = "toy/d" + std::to_string(domain_id) + "/c" +
                       std::to_string(class_id) + "/" + std::to_string(index);
    sample.set_label(class_id);
    return sample;
}

}  // namespace

std::pair<DomainDataset, DomainDataset> generate_toy_domain_pair(
    int num_classes, int per_class, int image_size, std::uint64_t seed) {
    if (num_classes < 2 || per_class < 2 || image_size < 16)
        throw std::invalid_argument("generate_toy_domain_pair: arguments out of range");
    std::pair<DomainDataset, DomainDataset> out;
    DomainDataset* doms[2] = {&out.first, &out.second};
    for (int d = 0; d < 2; ++d) {
        doms[d]->domain_id = d;
        doms[d]->num_categories = num_classes;
        for (int c = 0; c < num_classes; ++c)
            for (int i = 0; i < per_class; ++i)
                doms[d]->samples.push_back(render_toy_sample(c, d, i, image_size, seed));
    }
    return out;
}

ImageSample augment(const ImageSample& sample, std::mt19937_64& rng,
                    const AugmentOptions& opts) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    ImageSample out = sample;
    int h = sample.pixels.height(), w = sample.pixels.width();
    Eigen::MatrixXd* planes[3] = {&out.pixels.r, &out.pixels.g, &out.pixels.b};

    if (uni(rng) < opts.flip_prob)
        for (auto* p : planes) *p = p->rowwise().reverse().eval();

    if (opts.pad > 0) {
        std::uniform_int_distribution<int> off(0, 2 * opts.pad);
        int dx = off(rng), dy = off(rng);
        for (auto* p : planes) {
            Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(h + 2 * opts.pad, w + 2 * opts.pad);
            padded.block(opts.pad, opts.pad, h, w) = *p;
            *p = padded.block(dy, dx, h, w).eval();
        }
    }

    if (uni(rng) < opts.erase_prob) {
        double area = (opts.erase_min_area +
                       (opts.erase_max_area - opts.erase_min_area) * uni(rng)) * h * w;
        double aspect = 0.5 + 1.5 * uni(rng);
        int eh = std::clamp(static_cast<int>(std::round(std::sqrt(area * aspect))), 1, h);
        int ew = std::clamp(static_cast<int>(std::round(std::sqrt(area / aspect))), 1, w);
        std::uniform_int_distribution<int> ry(0, h - eh), rx(0, w - ew);
        int y0 = ry(rng), x0 = rx(rng);
        for (int y = y0; y < y0 + eh; ++y)
            for (int x = x0; x < x0 + ew; ++x)
                for (auto* p : planes) (*p)(y, x) = uni(rng);
    }
    return out;
}

Eigen::MatrixXd to_grayscale(const ImageSample& sample) {
    return 0.299 * sample.pixels.r + 0.587 * sample.pixels.g + 0.114 * sample.pixels.b;
}

}  // namespace tpsnet
