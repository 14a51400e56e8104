#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"
#include "tpsnet/ad.hpp"
#include "tpsnet/rng.hpp"

using namespace tpsnet;
using testutil::gradient_check;

TEST_CASE("matmul chain gradient") {
    auto rng = make_rng(1);
    ad::Var a = ad::leaf(random_normal(rng, 3, 4, 1.0));
    ad::Var b = ad::leaf(random_normal(rng, 4, 5, 1.0));
    auto build = [&] {
        return ad::weighted_sum(ad::matmul(a, b), Eigen::MatrixXd::Ones(3, 5));
    };
    CHECK(gradient_check({a, b}, build) < 1e-6);
}

TEST_CASE("softmax and logsumexp gradients") {
    auto rng = make_rng(2);
    ad::Var a = ad::leaf(random_normal(rng, 4, 6, 2.0));
    Eigen::MatrixXd w = random_normal(rng, 4, 6, 1.0);
    auto build_soft = [&] { return ad::weighted_sum(ad::softmax_rows(a), w); };
    CHECK(gradient_check({a}, build_soft) < 1e-6);
    Eigen::MatrixXd w2 = random_normal(rng, 4, 1, 1.0);
    auto build_lse = [&] { return ad::weighted_sum(ad::logsumexp_rows(a), w2); };
    CHECK(gradient_check({a}, build_lse) < 1e-6);
}

TEST_CASE("logsumexp matches naive log-sum-exp") {
    auto rng = make_rng(3);
    ad::Var a = ad::leaf(random_normal(rng, 5, 7, 3.0));
    ad::Var lse = ad::logsumexp_rows(a);
    for (int i = 0; i < 5; ++i) {
        double naive = std::log(a->value.row(i).array().exp().sum());
        CHECK(lse->value(i, 0) == doctest::Approx(naive).epsilon(1e-12));
    }
}

TEST_CASE("layer norm and channel norm gradients") {
    auto rng = make_rng(4);
    ad::Var x = ad::leaf(random_normal(rng, 3, 8, 1.5));
    ad::Var gamma = ad::leaf(random_normal(rng, 1, 8, 0.5));
    ad::Var beta = ad::leaf(random_normal(rng, 1, 8, 0.5));
    Eigen::MatrixXd w = random_normal(rng, 3, 8, 1.0);
    auto build = [&] { return ad::weighted_sum(ad::layer_norm_rows(x, gamma, beta), w); };
    CHECK(gradient_check({x, gamma, beta}, build) < 1e-5);

    ad::Var cg = ad::leaf(random_normal(rng, 3, 1, 0.5));
    ad::Var cb = ad::leaf(random_normal(rng, 3, 1, 0.5));
    auto build_cn = [&] { return ad::weighted_sum(ad::channel_norm(x, cg, cb), w); };
    CHECK(gradient_check({x, cg, cb}, build_cn) < 1e-5);
}

TEST_CASE("l2 normalize rows gradient and unit norm") {
    auto rng = make_rng(5);
    ad::Var x = ad::leaf(random_normal(rng, 3, 6, 1.0));
    ad::Var y = ad::l2_normalize_rows(x);
    for (int i = 0; i < 3; ++i)
        CHECK(y->value.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
    Eigen::MatrixXd w = random_normal(rng, 3, 6, 1.0);
    auto build = [&] { return ad::weighted_sum(ad::l2_normalize_rows(x), w); };
    CHECK(gradient_check({x}, build) < 1e-6);
}

TEST_CASE("conv3x3 and avgpool gradients") {
    auto rng = make_rng(6);
    ad::Var in = ad::leaf(random_normal(rng, 2, 36, 1.0));  // 2 channels, 6x6
    ad::Var w = ad::leaf(random_normal(rng, 3, 18, 0.5));
    ad::Var b = ad::leaf(random_normal(rng, 3, 1, 0.5));
    Eigen::MatrixXd mask = random_normal(rng, 3, 9, 1.0);
    auto build = [&] {
        ad::Var c = ad::conv3x3(in, w, b, 6, 6);
        ad::Var p = ad::avgpool2x2(ad::relu(c), 6, 6);
        return ad::weighted_sum(p, mask);
    };
    CHECK(gradient_check({in, w, b}, build) < 1e-5);
}

TEST_CASE("conv3x3 matches direct summation on a known case") {
    // Single channel 3x3 input, identity-like kernel picking the center.
    Eigen::MatrixXd in(1, 9);
    in << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(1, 9);
    w(0, 4) = 1.0;  // center tap
    ad::Var out = ad::conv3x3(ad::constant(in), ad::constant(w),
                              ad::constant(Eigen::MatrixXd::Zero(1, 1)), 3, 3);
    CHECK((out->value - in).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("attention-shaped composite gradient") {
    auto rng = make_rng(7);
    int d = 5;
    ad::Var q_in = ad::leaf(random_normal(rng, 3, d, 1.0));
    ad::Var kv = ad::leaf(random_normal(rng, 2, d, 1.0));
    ad::Var wq = ad::leaf(random_normal(rng, d, d, 0.5));
    ad::Var wk = ad::leaf(random_normal(rng, d, d, 0.5));
    ad::Var wv = ad::leaf(random_normal(rng, d, d, 0.5));
    Eigen::MatrixXd w = random_normal(rng, 1, d, 1.0);
    auto build = [&] {
        ad::Var att = ad::softmax_rows(
            ad::scale(ad::matmul_nt(ad::matmul(q_in, wq), ad::matmul(kv, wk)),
                      1.0 / std::sqrt(double(d))));
        return ad::weighted_sum(ad::mean_rows(ad::matmul(att, ad::matmul(kv, wv))), w);
    };
    CHECK(gradient_check({q_in, kv, wq, wk, wv}, build) < 1e-5);
}

TEST_CASE("gather stack mean reshape gradients") {
    auto rng = make_rng(8);
    ad::Var table = ad::leaf(random_normal(rng, 6, 4, 1.0));
    Eigen::MatrixXd w = random_normal(rng, 1, 4, 1.0);
    auto build = [&] {
        ad::Var g = ad::gather_rows(table, {1, 3, 3, 5});
        return ad::weighted_sum(ad::mean_rows(g), w);
    };
    CHECK(gradient_check({table}, build) < 1e-6);

    ad::Var m = ad::leaf(random_normal(rng, 3, 4, 1.0));
    Eigen::MatrixXd w2 = random_normal(rng, 1, 12, 1.0);
    auto build2 = [&] { return ad::weighted_sum(ad::reshape_row(m), w2); };
    CHECK(gradient_check({m}, build2) < 1e-6);
}
