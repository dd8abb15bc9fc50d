#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qfl/analysis.hpp"
#include "qfl/errors.hpp"

using namespace qfl;
using namespace qfl::analysis;

TEST_CASE("stealth membership") {
    StealthSetParams p{{1, 0}, 2.0, 0.5};
    auto in = stealth_membership(std::vector<double>{1, 1}, p);
    CHECK(in.member);
    CHECK(in.cosine == doctest::Approx(std::sqrt(0.5)));
    CHECK_FALSE(stealth_membership(std::vector<double>{0, 1}, p).member);  // cosine 0 < 0.5
    CHECK_FALSE(stealth_membership(std::vector<double>{3, 0}, p).member);  // too long
    p.center = {0, 0};
    const auto vac = stealth_membership(std::vector<double>{-1, 0}, p);
    CHECK(vac.cosine_vacuous);
    CHECK(vac.member);
    CHECK_THROWS_AS(stealth_membership(std::vector<double>{1, 0, 0}, p), ShapeError);
}

TEST_CASE("clipping and the bounded perturbation check") {
    std::vector<double> v{3, 4};
    clip_to_radius(v, 2.5);
    CHECK(oracle::norm(v) == doctest::Approx(2.5));
    CHECK(v[0] == doctest::Approx(1.5));
    std::vector<double> s{0.1, 0.1};
    clip_to_radius(s, 2.5);
    CHECK(s == std::vector<double>{0.1, 0.1});

    Rng rng(1);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 200; ++trial) {
        const double r = 0.5 + trial % 5;
        std::vector<agg::ClientUpdate> mal;
        for (int a = 0; a < 3; ++a) {
            std::vector<double> d(10);
            for (auto& x : d) x = 4 * nd(rng);
            clip_to_radius(d, r);
            mal.push_back({a, 0, d, 0.1});
        }
        const auto res = lemma1_check(mal, r, 0.3);
        CHECK(res.pass);
        CHECK(res.bound == doctest::Approx(0.3 * r));
    }
    std::vector<agg::ClientUpdate> big{{0, 0, {10.0, 0.0}, 0.5}};
    CHECK_FALSE(lemma1_check(big, 1.0, 0.5).pass);
}

TEST_CASE("deviation recursion check flags violations") {
    const std::vector<double> b{1, 1, 1};
    const auto bound = unrolled_deviation_bound(b, 0.5, 1.0);
    // e_{t+1} = 1.5 e_t + 1 from e_0 = 0: 1, 2.5, 4.75
    REQUIRE(bound.size() == 3);
    CHECK(bound[0] == doctest::Approx(1.0));
    CHECK(bound[1] == doctest::Approx(2.5));
    CHECK(bound[2] == doctest::Approx(4.75));
    std::vector<double> devs{0, 1, 2.5, 4.75};
    const auto ok = proposition1_check(devs, b, 0.5, 1.0);
    CHECK(ok.violations == 0);
    CHECK(ok.max_residual == doctest::Approx(0.0).epsilon(1e-12));
    devs[2] = 2.6;
    const auto bad = proposition1_check(devs, b, 0.5, 1.0);
    CHECK(bad.violations == 1);
    CHECK(bad.residuals[1] == doctest::Approx(0.1));
}

TEST_CASE("quadratic objective: smoothness and the recursion") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const auto obj = QuadraticObjective::random(4, 5, 7, rng);
        // Power iteration on the weighted Hessian.
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(5, 5);
        for (int k = 0; k < 4; ++k) h += obj.weights[k] * obj.a[k].transpose() * obj.a[k];
        Eigen::VectorXd v = Eigen::VectorXd::Ones(5);
        for (int it = 0; it < 2000; ++it) v = (h * v).normalized();
        CHECK(obj.smoothness() == doctest::Approx(v.dot(h * v)).epsilon(1e-8));
        // Gradient oracle: A^T (A theta - c).
        Eigen::VectorXd th = Eigen::VectorXd::Random(5);
        const Eigen::VectorXd g = obj.a[1].transpose() * (obj.a[1] * th - obj.c[1]);
        CHECK((obj.client_gradient(1, th) - g).norm() < 1e-12);

        const std::vector<int> mal{0};
        const auto run = run_quadratic_federation(obj, mal, 50, 0.5, 1.0, 0.3, rng);
        REQUIRE(run.deviations.size() == 51);
        for (std::size_t t = 0; t < run.b_norms.size(); ++t) {
            CHECK(run.b_norms[t] <= 0.3 * obj.weights[0] + 1e-12);
            CHECK(run.deviations[t + 1] <= (1 + run.L) * run.deviations[t] + run.b_norms[t] + 1e-9);
        }
        CHECK(proposition1_check(run.deviations, run.b_norms, run.L, 1.0).violations == 0);
    }
}

TEST_CASE("margins") {
    CHECK(margin(std::vector<double>{0.1, 0.9, 0.4}) == doctest::Approx(0.5));
    CHECK(margin(std::vector<double>{2, 2, 1}) == 0.0);
    CHECK(accuracy_drop(92.65, 40.95) == doctest::Approx(51.70));
    CHECK(accuracy_drop(70.15, 34.87) == doctest::Approx(35.28));
}

TEST_CASE("output Lipschitz and smoothness estimates on a tiny model") {
    Rng rng(3);
    const model::ModelArchitecture arch{2, 1, 1, 3, 3};
    const auto manifest = model::ParamManifest::for_architecture(arch);
    const auto circuit = model::clean_template(arch);
    Batch test;
    test.input_dim = 3;
    test.n_classes = 3;
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 3; ++j) test.inputs.push_back(u(rng));
        test.labels.push_back(i % 3);
    }
    const auto a = model::init_params(arch, rng);
    auto b = a;
    for (auto& x : b.flat) x += 1e-3 * u(rng);
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs{{a.flat, b.flat}, {a.flat, a.flat}};
    double expect = 0.0;
    const double dist = std::sqrt(oracle::dist2(a.flat, b.flat));
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto la = model::forward(test.input(i), a, circuit).logits;
        const auto lb = model::forward(test.input(i), b, circuit).logits;
        for (std::size_t c = 0; c < la.size(); ++c) expect = std::max(expect, std::abs(la[c] - lb[c]) / dist);
    }
    CHECK(estimate_output_lipschitz(pairs, manifest, circuit, test) == doctest::Approx(expect));
    const auto stats = theorem1_statistics(a, b, circuit, test, pairs);
    CHECK(stats.drift == doctest::Approx(dist));
    CHECK(stats.flip_fraction >= 0.0);
    CHECK(stats.band_fraction >= stats.flip_fraction);  // a flip needs margin <= 2 L drift
    const auto ga = model::backward(test, a, circuit, 1.0).gradient;
    const auto gb = model::backward(test, b, circuit, 1.0).gradient;
    CHECK(estimate_smoothness(pairs, manifest, circuit, test) ==
          doctest::Approx(std::sqrt(oracle::dist2(ga, gb)) / dist));
}
