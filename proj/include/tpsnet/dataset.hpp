#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tpsnet {

// RGB image, channel planes in [0,1].
struct Image {
    Eigen::MatrixXd r, g, b;
    int height() const { return static_cast<int>(r.rows()); }
    int width() const { return static_cast<int>(r.cols()); }
    bool in_unit_range() const;
};

// Scope guard that makes ground-truth labels unreadable. Training code
// runs under an active guard; any label access inside trips an error.
class LabelAccessGuard {
public:
    LabelAccessGuard();
    ~LabelAccessGuard();
    static bool active();
    LabelAccessGuard(const LabelAccessGuard&) = delete;
    LabelAccessGuard& operator=(const LabelAccessGuard&) = delete;
};

struct ImageSample {
    Image pixels;
    int domain_id = 0;
    std::string sample_id;

    void set_label(std::optional<int> label) { true_label_ = label; }
    bool has_label() const { return true_label_.has_value(); }
    // Evaluation-only accessor; throws when a LabelAccessGuard is active.
    int eval_label() const;

private:
    std::optional<int> true_label_;
};

struct DomainDataset {
    std::vector<ImageSample> samples;
    int domain_id = 0;
    int num_categories = 0;
};

struct AugmentOptions {
    double flip_prob = 0.5;
    int pad = 4;
    double erase_prob = 0.5;
    double erase_min_area = 0.02;
    double erase_max_area = 0.20;
};

// Loads root/<category>/<image files>; categories map to label indices
// in lexicographic order, files are sorted within each category.
DomainDataset load_domain_directory(const std::string& root_path, int domain_id);

// Deterministic two-domain synthetic corpus: domain 0 renders filled
// shapes, domain 1 renders edge sketches of the same shape family.
std::pair<DomainDataset, DomainDataset> generate_toy_domain_pair(
    int num_classes, int per_class, int image_size, std::uint64_t seed);

ImageSample augment(const ImageSample& sample, std::mt19937_64& rng,
                    const AugmentOptions& opts = {});

// Luma conversion 0.299 R + 0.587 G + 0.114 B.
Eigen::MatrixXd to_grayscale(const ImageSample& sample);

}  // namespace tpsnet
