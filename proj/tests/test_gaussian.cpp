#include "doctest.h"

#include <cmath>

#include "tshap/errors.hpp"
#include "tshap/gaussian.hpp"

using namespace tshap;

namespace {

GaussianModel correlated3() {
    Eigen::Vector3d mu = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
    cov(1, 2) = cov(2, 1) = -0.3;
    return GaussianModel(mu, cov);
}

} // namespace

TEST_CASE("construction rejects bad covariance") {
    Eigen::Matrix2d not_spd;
    not_spd << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(GaussianModel(Eigen::Vector2d::Zero(), not_spd), ModelError);
    Eigen::Matrix2d asym;
    asym << 1.0, 0.2, 0.1, 1.0;
    CHECK_THROWS_AS(GaussianModel(Eigen::Vector2d::Zero(), asym), ModelError);
}

TEST_CASE("standard normal density value") {
    GaussianModel g(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    // marginal over {1} at 0 is 1/sqrt(2 pi)
    const double val = g.marginal_density(Subset(2, {0}), Eigen::VectorXd::Zero(1));
    CHECK(val == doctest::Approx(0.3989422804014327).epsilon(1e-12));
}

TEST_CASE("marginal density of the correlated block") {
    // v = {2,3}, x = (0,0): bivariate normal with det(Sigma_vv) = 0.91
    GaussianModel g = correlated3();
    const double val = g.marginal_density(Subset(3, {1, 2}), Eigen::Vector2d::Zero());
    CHECK(val == doctest::Approx(0.1668397135325737).epsilon(1e-12));
}

TEST_CASE("conditional with identity covariance is the marginal") {
    GaussianModel g(Eigen::VectorXd::Ones(3), Eigen::MatrixXd::Identity(3, 3));
    Subset u(3, {0, 2});
    Eigen::VectorXd xc(1);
    xc << 5.0;
    GaussianModel cond = gaussian_conditional(g, u, xc);
    CHECK(cond.mean_vector().isApprox(Eigen::Vector2d::Ones()));
    CHECK(cond.covariance_matrix().isApprox(Eigen::Matrix2d::Identity()));
}

TEST_CASE("bivariate textbook conditional") {
    Eigen::Vector2d mu(1.0, 2.0);
    Eigen::Matrix2d cov;
    const double rho = 0.6;
    cov << 1.0, rho, rho, 1.0;
    GaussianModel g(mu, cov);
    Eigen::VectorXd x2(1);
    x2 << 3.0;
    GaussianModel cond = gaussian_conditional(g, Subset(2, {0}), x2);
    CHECK(cond.mean_vector()[0] == doctest::Approx(1.0 + rho * (3.0 - 2.0)).epsilon(1e-14));
    CHECK(cond.covariance_matrix()(0, 0) == doctest::Approx(1.0 - rho * rho).epsilon(1e-14));
}

TEST_CASE("correlated-block conditional matches an independent Schur computation") {
    // u = {2}, conditioning on (x1, x3) = (0, 1): mean -0.3, variance 0.91.
    // Expected values recomputed by hand from the 3x3 partition.
    GaussianModel g = correlated3();
    Eigen::Vector2d xc(0.0, 1.0);
    GaussianModel cond = gaussian_conditional(g, Subset(3, {1}), xc);
    CHECK(cond.mean_vector()[0] == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(cond.covariance_matrix()(0, 0) == doctest::Approx(0.91).epsilon(1e-12));
}

TEST_CASE("log joint equals log conditional plus log marginal") {
    GaussianModel g = correlated3();
    Rng rng = make_rng(7);
    for (int it = 0; it < 1000; ++it) {
        Eigen::VectorXd x = g.sample(1, rng).row(0).transpose();
        for (std::uint32_t mask = 1; mask < 7; ++mask) {
            Subset u = Subset::from_mask(3, mask);
            Subset c = u.complement();
            GaussianModel cond = gaussian_conditional(g, u, c.gather(x));
            const double lhs = g.log_density(x);
            const double rhs =
                cond.log_density(u.gather(x)) + g.log_marginal_density(c, c.gather(x));
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        }
    }
}

TEST_CASE("tower property of nested conditioning") {
    GaussianModel g = correlated3();
    // condition on x3 first, then on x2, versus conditioning on (x2,x3) at once
    Eigen::VectorXd x3(1), x2(1), x23(2);
    x3 << 0.7;
    x2 << -0.2;
    x23 << -0.2, 0.7;
    GaussianModel step1 = gaussian_conditional(g, Subset(3, {0, 1}), x3);
    GaussianModel step2 = gaussian_conditional(step1, Subset(2, {0}), x2);
    GaussianModel once = gaussian_conditional(g, Subset(3, {0}), x23);
    CHECK(step2.mean_vector().isApprox(once.mean_vector(), 1e-10));
    CHECK(step2.covariance_matrix().isApprox(once.covariance_matrix(), 1e-10));
}

TEST_CASE("sampling determinism and moments") {
    GaussianModel g = correlated3();
    Rng r1 = make_rng(42), r2 = make_rng(42);
    CHECK(g.sample(50, r1).isApprox(g.sample(50, r2)));

    const int n = 100000;
    Rng rng = make_rng(3);
    Eigen::MatrixXd pts = g.sample(n, rng);
    const double tol = 4.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < 3; ++j) CHECK(std::abs(pts.col(j).mean()) < tol);
    Eigen::MatrixXd centered = pts.rowwise() - pts.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
    CHECK(cov(1, 2) == doctest::Approx(-0.3).epsilon(0.15));
}

TEST_CASE("conditional generator matches one-shot conditionals") {
    GaussianModel g = correlated3();
    GaussianConditional gen = g.conditional_generator(Subset(3, {1}));
    Eigen::Vector2d xc(0.0, 1.0);
    CHECK(gen.mean_given(xc)[0] == doctest::Approx(-0.3).epsilon(1e-12));
    Rng r1 = make_rng(5), r2 = make_rng(5);
    Eigen::MatrixXd a = gen.sample(xc, 10, r1);
    Eigen::MatrixXd b = g.sample_conditional(Subset(3, {1}), xc, 10, r2);
    CHECK(a.isApprox(b));
}
