#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tpsnet/dataset.hpp"
#include "tpsnet/image_io.hpp"
#include "tpsnet/rng.hpp"

namespace fs = std::filesystem;
using namespace tpsnet;

namespace {

ImageSample solid_sample(int size, double r, double g, double b) {
    ImageSample s;
    s.pixels.r = Eigen::MatrixXd::Constant(size, size, r);
    s.pixels.g = Eigen::MatrixXd::Constant(size, size, g);
    s.pixels.b = Eigen::MatrixXd::Constant(size, size, b);
    s.sample_id = "solid";
    return s;
}

fs::path make_tree(int categories, int files_per_cat) {
    fs::path root = fs::temp_directory_path() / "tpsnet_dataset_test";
    fs::remove_all(root);
    for (int c = 0; c < categories; ++c) {
        fs::path dir = root / ("cat" + std::to_string(c));
        fs::create_directories(dir);
        for (int f = 0; f < files_per_cat; ++f) {
            ImageSample s = solid_sample(16, 0.1 * c, 0.2, 0.05 * f);
            save_image_png(s.pixels, (dir / (std::to_string(f) + ".png")).string());
        }
    }
    return root;
}

}  // namespace

TEST_CASE("load_domain_directory counting and ordering") {
    fs::path root = make_tree(2, 3);
    DomainDataset ds = load_domain_directory(root.string(), 0);
    CHECK(ds.samples.size() == 6);
    CHECK(ds.num_categories == 2);
    DomainDataset ds2 = load_domain_directory(root.string(), 0);
    REQUIRE(ds2.samples.size() == ds.samples.size());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        CHECK(ds.samples[i].sample_id == ds2.samples[i].sample_id);
        CHECK(ds.samples[i].pixels.r == ds2.samples[i].pixels.r);
    }
    fs::remove_all(root);
}

TEST_CASE("load_domain_directory error paths") {
    CHECK_THROWS(load_domain_directory("/nonexistent/path/xyz", 0));
    fs::path empty_root = fs::temp_directory_path() / "tpsnet_empty_root";
    fs::remove_all(empty_root);
    fs::create_directories(empty_root);
    CHECK_THROWS_WITH_AS(load_domain_directory(empty_root.string(), 0),
                         doctest::Contains("no category directories"), std::runtime_error);
    fs::remove_all(empty_root);
}

TEST_CASE("toy pair counts, determinism, invariants") {
    auto [a, b] = generate_toy_domain_pair(5, 4, 32, 0);
    CHECK(a.samples.size() == 20);
    CHECK(b.samples.size() == 20);
    CHECK(a.num_categories == 5);
    CHECK(b.num_categories == 5);
    auto [a2, b2] = generate_toy_domain_pair(5, 4, 32, 0);
    for (size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].pixels.r == a2.samples[i].pixels.r);
        CHECK(b.samples[i].pixels.g == b2.samples[i].pixels.g);
        CHECK(a.samples[i].domain_id == 0);
        CHECK(b.samples[i].domain_id == 1);
        CHECK(a.samples[i].pixels.in_unit_range());
        CHECK(b.samples[i].pixels.in_unit_range());
    }
    auto [a3, b3] = generate_toy_domain_pair(5, 4, 32, 1);
    CHECK(a.samples[0].pixels.r != a3.samples[0].pixels.r);
    CHECK_THROWS(generate_toy_domain_pair(1, 4, 32, 0));
    CHECK_THROWS(generate_toy_domain_pair(5, 1, 32, 0));
    CHECK_THROWS(generate_toy_domain_pair(5, 4, 8, 0));
}

TEST_CASE("augment identity when disabled") {
    ImageSample s = solid_sample(16, 0.3, 0.6, 0.9);
    AugmentOptions off;
    off.flip_prob = 0.0;
    off.pad = 0;
    off.erase_prob = 0.0;
    auto rng = make_rng(0);
    ImageSample out = augment(s, rng, off);
    CHECK(out.pixels.r == s.pixels.r);
    CHECK(out.pixels.g == s.pixels.g);
    CHECK(out.pixels.b == s.pixels.b);
}

TEST_CASE("forced flip mirrors columns") {
    ImageSample s = solid_sample(8, 0.0, 0.0, 0.0);
    s.pixels.r.col(0).setOnes();
    AugmentOptions opts;
    opts.flip_prob = 1.0;
    opts.pad = 0;
    opts.erase_prob = 0.0;
    auto rng = make_rng(1);
    ImageSample out = augment(s, rng, opts);
    CHECK(out.pixels.r.col(7).minCoeff() == doctest::Approx(1.0));
    CHECK(out.pixels.r.col(0).maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("augment determinism and range preservation") {
    auto [a, b] = generate_toy_domain_pair(3, 2, 32, 7);
    for (const auto& s : a.samples) {
        auto r1 = make_rng(42), r2 = make_rng(42);
        ImageSample o1 = augment(s, r1), o2 = augment(s, r2);
        CHECK(o1.pixels.r == o2.pixels.r);
        CHECK(o1.pixels.b == o2.pixels.b);
        CHECK(o1.pixels.in_unit_range());
    }
}

TEST_CASE("grayscale luma weights") {
    ImageSample white = solid_sample(4, 1, 1, 1);
    CHECK(to_grayscale(white)(0, 0) == doctest::Approx(1.0));
    ImageSample red = solid_sample(4, 1, 0, 0);
    CHECK(to_grayscale(red)(0, 0) == doctest::Approx(0.299));
    ImageSample gray = solid_sample(4, 0.37, 0.37, 0.37);
    CHECK(to_grayscale(gray)(0, 0) == doctest::Approx(0.37));
}

TEST_CASE("label guard blocks training-time access") {
    ImageSample s = solid_sample(4, 0.5, 0.5, 0.5);
    s.set_label(3);
    CHECK(s.eval_label() == 3);
    {
        LabelAccessGuard guard;
        CHECK(LabelAccessGuard::active());
        CHECK_THROWS_AS(s.eval_label(), std::logic_error);
    }
    CHECK_FALSE(LabelAccessGuard::active());
    CHECK(s.eval_label() == 3);
}

TEST_CASE("png round trip preserves 8-bit values") {
    auto [a, b] = generate_toy_domain_pair(2, 2, 32, 3);
    fs::path p = fs::temp_directory_path() / "tpsnet_roundtrip.png";
    save_image_png(a.samples[0].pixels, p.string());
    Image loaded = load_image_file(p.string());
    CHECK((loaded.r * 255.0 -
           (a.samples[0].pixels.r * 255.0).unaryExpr([](double v) { return std::round(v); }))
              .cwiseAbs()
              .maxCoeff() < 0.5);
    fs::remove(p);
}
