#include "doctest.h"

#include <cmath>

#include "test_util.hpp"
#include "tshap/oracles.hpp"
#include "tshap/rare_event.hpp"

using namespace tshap;
using testutil::GoptLinearModel;
using testutil::RepStats;
using testutil::stats;
using testutil::within_3se;

namespace {

FailureProblem scalar_problem(double t) {
    GaussianLinearSpec spec;
    spec.beta = Eigen::VectorXd::Ones(1);
    spec.mean = Eigen::VectorXd::Zero(1);
    spec.covariance = Eigen::MatrixXd::Identity(1, 1);
    spec.t = t;
    return gaussian_linear(spec);
}

// sample from g, evaluate indicators, wrap
WeightedFailureSample draw_sample(const FailureProblem& p, const InputModelPtr& g, int n,
                                  Rng& rng) {
    Eigen::MatrixXd pts = g->sample(n, rng);
    std::vector<std::uint8_t> ind(n);
    for (int i = 0; i < n; ++i) ind[i] = p.failure(pts.row(i).transpose()) ? 1 : 0;
    return WeightedFailureSample::build(std::move(pts), std::move(ind), p.input, g);
}

} // namespace

TEST_CASE("crude MC on a certain event") {
    FailureProblem p = scalar_problem(-1e12);
    Rng rng = make_rng(1);
    auto est = mc_failure_probability(p, 500, rng);
    CHECK(est.value == 1.0);
    CHECK(est.std_error == 0.0);
    CHECK(!est.rare_warning);
}

TEST_CASE("crude MC matches the analytic probability") {
    FailureProblem p = gaussian_linear(gaussian_linear_default_spec());
    Rng rng = make_rng(2);
    auto est = mc_failure_probability(p, 1000000, rng);
    const double truth = 0.004911637253759649;
    CHECK(std::abs(est.value - truth) < 3.0 * est.std_error);
}

TEST_CASE("weights follow the 0/0 convention") {
    FailureProblem p = scalar_problem(0.5);
    auto g = std::make_shared<GaussianModel>(Eigen::VectorXd::Constant(1, 1.0),
                                             Eigen::MatrixXd::Identity(1, 1));
    Rng rng = make_rng(3);
    WeightedFailureSample s = draw_sample(p, g, 2000, rng);
    for (int i = 0; i < s.size(); ++i) {
        if (!s.indicators[i]) CHECK(s.weights[i] == 0.0);
        else CHECK(s.weights[i] > 0.0);
    }
}

TEST_CASE("is estimator with g = f reduces to the indicator mean bit for bit") {
    FailureProblem p = scalar_problem(1.0);
    Rng rng = make_rng(4);
    WeightedFailureSample s = draw_sample(p, p.input, 5000, rng);
    double mean_ind = 0.0;
    for (auto v : s.indicators) mean_ind += v;
    mean_ind /= s.size();
    CHECK(is_failure_probability(s).value == mean_ind);
}

TEST_CASE("is estimator is unbiased for the scalar tail") {
    // f = N(0,1), t = 2, g = N(2,1): mean over replications near 1 - Phi(2)
    FailureProblem p = scalar_problem(2.0);
    auto g = std::make_shared<GaussianModel>(Eigen::VectorXd::Constant(1, 2.0),
                                             Eigen::MatrixXd::Identity(1, 1));
    Rng rng = make_rng(5);
    std::vector<double> estimates;
    for (int r = 0; r < 200; ++r)
        estimates.push_back(is_failure_probability(draw_sample(p, g, 1000, rng)).value);
    const RepStats s = stats(estimates);
    CHECK(within_3se(s, 0.022750131948179212));
}

TEST_CASE("optimal auxiliary density gives constant weights") {
    GaussianLinearSpec spec;
    spec.beta = Eigen::Vector2d(1.0, 1.0);
    spec.mean = Eigen::Vector2d::Zero();
    spec.covariance = Eigen::Matrix2d::Identity();
    spec.t = 3.0;
    FailureProblem p = gaussian_linear(spec);
    const double pt = gl_failure_probability(spec);
    auto gopt = std::make_shared<GoptLinearModel>(spec.beta, spec.t, pt);
    Rng rng = make_rng(6);
    WeightedFailureSample s = draw_sample(p, gopt, 400, rng);
    for (int i = 0; i < s.size(); ++i)
        CHECK(s.weights[i] == doctest::Approx(pt).epsilon(1e-12));
    auto est = is_failure_probability(s);
    CHECK(est.value == doctest::Approx(pt).epsilon(1e-12));
    CHECK(est.std_error < 1e-14); // zero-variance estimator
}

TEST_CASE("unbiased p^2 estimator: exact cases") {
    FailureProblem p = scalar_problem(-1e12); // psi identically one
    Rng rng = make_rng(7);
    WeightedFailureSample s = draw_sample(p, p.input, 50, rng);
    CHECK(is_pt_squared_unbiased(s) == doctest::Approx(1.0).epsilon(1e-14));

    FailureProblem rare = scalar_problem(1e12); // psi identically zero
    WeightedFailureSample s0 = draw_sample(rare, rare.input, 50, rng);
    CHECK(is_pt_squared_unbiased(s0) == 0.0);
    CHECK(is_failure_probability(s0).rare_warning);

    WeightedFailureSample tiny = draw_sample(p, p.input, 1, rng);
    CHECK_THROWS_AS(is_pt_squared_unbiased(tiny), ArgumentError);
}

TEST_CASE("unbiased p^2 estimator against the squared tail oracle") {
    FailureProblem p = scalar_problem(2.0);
    auto g = std::make_shared<GaussianModel>(Eigen::VectorXd::Constant(1, 2.0),
                                             Eigen::MatrixXd::Identity(1, 1));
    Rng rng = make_rng(8);
    std::vector<double> estimates;
    for (int r = 0; r < 4000; ++r)
        estimates.push_back(is_pt_squared_unbiased(draw_sample(p, g, 250, rng)));
    const double truth = 0.022750131948179212;
    CHECK(within_3se(stats(estimates), truth * truth));
}

TEST_CASE("variance-of-mean estimator") {
    CHECK(variance_of_mean_unbiased(Eigen::VectorXd::Constant(10, 3.3)) ==
          doctest::Approx(0.0).epsilon(1e-15));
    Eigen::VectorXd two(2);
    two << 0.0, 1.0;
    CHECK(variance_of_mean_unbiased(two) == doctest::Approx(0.25).epsilon(1e-14));
    Eigen::VectorXd one(1);
    one << 1.0;
    CHECK_THROWS_AS(variance_of_mean_unbiased(one), ArgumentError);

    // Bernoulli(0.3) samples of size 50: E = 0.3 * 0.7 / 50
    Rng rng = make_rng(9);
    std::vector<double> estimates;
    for (int r = 0; r < 10000; ++r) {
        Eigen::VectorXd z(50);
        for (int i = 0; i < 50; ++i) z[i] = uniform01(rng) < 0.3 ? 1.0 : 0.0;
        estimates.push_back(variance_of_mean_unbiased(z));
    }
    CHECK(within_3se(stats(estimates), 0.3 * 0.7 / 50.0));
}

TEST_CASE("paired identity: E[pt2_unbiased] = (E[pt_is])^2 statistically") {
    FailureProblem p = scalar_problem(2.0);
    auto g = std::make_shared<GaussianModel>(Eigen::VectorXd::Constant(1, 2.0),
                                             Eigen::MatrixXd::Identity(1, 1));
    Rng rng = make_rng(10);
    std::vector<double> sq, pt;
    for (int r = 0; r < 3000; ++r) {
        WeightedFailureSample s = draw_sample(p, g, 200, rng);
        pt.push_back(is_failure_probability(s).value);
        sq.push_back(is_pt_squared_unbiased(s));
    }
    const RepStats ssq = stats(sq);
    const double target = 0.022750131948179212;
    CHECK(within_3se(ssq, target * target));
    CHECK(within_3se(stats(pt), target));
}

TEST_CASE("cross entropy converges in one level when the target is easy") {
    FailureProblem p = gaussian_linear(gaussian_linear_default_spec());
    p.threshold = -5.0; // well below the phi median
    CrossEntropyConfig cfg;
    Rng rng = make_rng(11);
    auto res = cross_entropy_fit(p, cfg, 500, rng);
    CHECK(res.diag.reached_target);
    CHECK(res.diag.levels == 1);
    CHECK(res.sample.size() == 500);
    // g fitted on the kept half: pushed toward larger phi values
    const auto* g = dynamic_cast<const GaussianModel*>(res.aux.get());
    REQUIRE(g != nullptr);
    CHECK(g->mean_vector().sum() > 0.0);
}

TEST_CASE("cross entropy is deterministic given seed and config") {
    FailureProblem p = gaussian_linear(gaussian_linear_default_spec());
    CrossEntropyConfig cfg;
    cfg.samples_per_level = 1000;
    Rng r1 = make_rng(12), r2 = make_rng(12);
    auto a = cross_entropy_fit(p, cfg, 300, r1);
    auto b = cross_entropy_fit(p, cfg, 300, r2);
    CHECK(a.diag.levels == b.diag.levels);
    const auto* ga = dynamic_cast<const GaussianModel*>(a.aux.get());
    const auto* gb = dynamic_cast<const GaussianModel*>(b.aux.get());
    CHECK(ga->mean_vector() == gb->mean_vector());
    CHECK(ga->covariance_matrix() == gb->covariance_matrix());
    CHECK(a.sample.points == b.sample.points);
}

TEST_CASE("cross entropy single gaussian solves the default case") {
    FailureProblem p = gaussian_linear(gaussian_linear_default_spec());
    CrossEntropyConfig cfg;
    Rng rng = make_rng(13);
    const int n_final = 4000;
    auto res = cross_entropy_fit(p, cfg, n_final, rng);
    REQUIRE(res.diag.reached_target);
    auto est = is_failure_probability(res.sample);
    const double truth = 0.004911637253759649;
    CHECK(std::abs(est.value - truth) < 3.0 * est.std_error);
    // all weights finite and nonnegative
    CHECK(res.sample.weights.allFinite());
    CHECK(res.sample.weights.minCoeff() >= 0.0);
    // variance beats crude MC at the same total budget
    const long long budget = res.diag.phi_calls;
    const double crude_cov = std::sqrt((1.0 - truth) / (truth * budget));
    const double is_cov = est.std_error / est.value;
    CHECK(is_cov < crude_cov);
}

TEST_CASE("cross entropy mixture family works on the default case") {
    FailureProblem p = gaussian_linear(gaussian_linear_default_spec());
    CrossEntropyConfig cfg;
    cfg.family = CrossEntropyConfig::Family::GaussianMixture;
    cfg.components = 2;
    Rng rng = make_rng(14);
    auto res = cross_entropy_fit(p, cfg, 4000, rng);
    REQUIRE(res.diag.reached_target);
    auto est = is_failure_probability(res.sample);
    const double truth = 0.004911637253759649;
    CHECK(std::abs(est.value - truth) < 4.0 * est.std_error);
}

TEST_CASE("cross entropy mixture solves the fire-spread reliability problem") {
    // reference value is ~1.4e-4; accept a 20% relative band around it
    FailureProblem p = fire_spread();
    CrossEntropyConfig cfg;
    cfg.family = CrossEntropyConfig::Family::GaussianMixture;
    cfg.components = 2;
    cfg.samples_per_level = 4000;
    Rng rng = make_rng(4);
    auto res = cross_entropy_fit(p, cfg, 10000, rng);
    REQUIRE(res.diag.reached_target);
    const auto est = is_failure_probability(res.sample);
    CHECK(std::abs(est.value - 1.4e-4) <= 0.2 * 1.4e-4);
    CHECK(res.sample.weights.allFinite());
}

TEST_CASE("cross entropy config validation") {
    FailureProblem p = scalar_problem(2.0);
    Rng rng = make_rng(15);
    CrossEntropyConfig bad;
    bad.elite_quantile = 0.0;
    CHECK_THROWS_AS(cross_entropy_fit(p, bad, 0, rng), ConfigError);
    bad = CrossEntropyConfig{};
    bad.samples_per_level = 20; // below 10 / rho
    CHECK_THROWS_AS(cross_entropy_fit(p, bad, 0, rng), ConfigError);
    bad = CrossEntropyConfig{};
    bad.smoothing = 0.0;
    CHECK_THROWS_AS(cross_entropy_fit(p, bad, 0, rng), ConfigError);
}

TEST_CASE("cross entropy reports failure to reach an impossible target") {
    FailureProblem p = scalar_problem(50.0); // unreachable within a few levels
    CrossEntropyConfig cfg;
    cfg.samples_per_level = 200;
    cfg.max_levels = 2;
    Rng rng = make_rng(16);
    auto res = cross_entropy_fit(p, cfg, 100, rng);
    CHECK(!res.diag.reached_target);
    CHECK(res.sample.size() == 0);
}
