#include "tshap/oracles.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "tshap/aggregation.hpp"
#include "tshap/errors.hpp"
#include "tshap/gaussian.hpp"

namespace tshap {

GaussHermite::GaussHermite(int n) {
    if (n < 32) throw ArgumentError("GaussHermite: node count must be >= 32");
    // Golub-Welsch: eigen-decompose the Jacobi matrix of the (physicists')
    // Hermite recurrence; off-diagonal entries sqrt(k/2).
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double off = std::sqrt(0.5 * k);
        jacobi(k, k - 1) = jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    nodes_ = es.eigenvalues();
    weights_.resize(n);
    const double sqrt_pi = std::sqrt(M_PI);
    for (int k = 0; k < n; ++k) {
        const double v0 = es.eigenvectors()(0, k);
        weights_[k] = sqrt_pi * v0 * v0;
    }
}

double GaussHermite::expect(const std::function<double(double)>& h, double mean,
                            double sd) const {
    // E[h(Z)], Z ~ N(mean, sd^2): substitute z = mean + sqrt(2) sd x.
    const double c = std::sqrt(2.0) * sd;
    double acc = 0.0;
    for (int k = 0; k < nodes_.size(); ++k) acc += weights_[k] * h(mean + c * nodes_[k]);
    return acc / std::sqrt(M_PI);
}

double gl_failure_probability(const GaussianLinearSpec& spec) {
    const double q = spec.beta.dot(spec.covariance * spec.beta);
    if (!(q > 0.0)) throw ArgumentError("gl_failure_probability: beta' Sigma beta must be > 0");
    return 1.0 - normal_cdf((spec.t - spec.beta.dot(spec.mean)) / std::sqrt(q));
}

double gl_target_closed_sobol(const GaussianLinearSpec& spec, const Subset& u,
                              const QuadratureConfig& quad) {
    return gl_target_closed_sobol(spec, u, GaussHermite(quad.nodes));
}

double gl_target_closed_sobol(const GaussianLinearSpec& spec, const Subset& u,
                              const GaussHermite& gh) {
    const int d = static_cast<int>(spec.beta.size());
    if (u.dim() != d) throw ArgumentError("gl_target_closed_sobol: subset dimension mismatch");
    if (!u.proper()) throw ArgumentError("gl_target_closed_sobol: subset must be proper nonempty");
    const Subset comp = u.complement();
    const Eigen::VectorXd beta_u = u.gather(spec.beta);
    const Eigen::VectorXd beta_c = comp.gather(spec.beta);
    const double p = gl_failure_probability(spec);
    if (beta_c.isZero(0.0)) return p * (1.0 - p); // phi depends on X_u only

    const auto& mem_u = u.members();
    const auto& mem_c = comp.members();
    Eigen::MatrixXd s_uu(u.size(), u.size()), s_cu(comp.size(), u.size()),
        s_cc(comp.size(), comp.size());
    for (int i = 0; i < u.size(); ++i)
        for (int j = 0; j < u.size(); ++j) s_uu(i, j) = spec.covariance(mem_u[i], mem_u[j]);
    for (int i = 0; i < comp.size(); ++i)
        for (int j = 0; j < u.size(); ++j) s_cu(i, j) = spec.covariance(mem_c[i], mem_u[j]);
    for (int i = 0; i < comp.size(); ++i)
        for (int j = 0; j < comp.size(); ++j) s_cc(i, j) = spec.covariance(mem_c[i], mem_c[j]);

    Eigen::LLT<Eigen::MatrixXd> llt_uu(s_uu);
    if (llt_uu.info() != Eigen::Success)
        throw ArgumentError("gl_target_closed_sobol: conditioning block not positive definite");
    const Eigen::MatrixXd schur = s_cc - s_cu * llt_uu.solve(s_cu.transpose());
    const double denom2 = beta_c.dot(schur * beta_c);
    if (!(denom2 > 0.0))
        throw ArgumentError("gl_target_closed_sobol: conditional variance quadratic form is "
                            "numerically rank-deficient");
    const double denom = std::sqrt(denom2);

    // A = (t - beta' mu - a' (X_u - mu_u)) / denom with
    // a = beta_u + Sigma_uu^{-1} Sigma_uc beta_c, X_u ~ N(mu_u, Sigma_uu).
    const Eigen::VectorXd a = beta_u + llt_uu.solve(s_cu.transpose() * beta_c);
    const double mean_a = (spec.t - spec.beta.dot(spec.mean)) / denom;
    const double var_a = a.dot(s_uu * a) / denom2;
    if (var_a <= 0.0) return 0.0; // A is constant: dummy subset
    const double sd_a = std::sqrt(var_a);

    double e1, e2;
    if (sd_a <= 1.0) {
        // Phi(mean + sd W) varies on a scale >= 1 in W: integrate directly.
        e1 = gh.expect([](double z) { return normal_cdf(z); }, mean_a, sd_a);
        e2 = gh.expect(
            [](double z) {
                const double c = normal_cdf(z);
                return c * c;
            },
            mean_a, sd_a);
    } else {
        // Wide A: swap the roles so the integrand stays resolvable.
        // E[Phi(A)]   = P(Z <= A)      = E_Z[1 - Phi((Z - m)/s)]
        // E[Phi(A)^2] = P(max(Z,Z')<=A) = E_Z[2 Phi(Z) (1 - Phi((Z - m)/s))]
        // with Z, Z' standard normal independent of A.
        e1 = gh.expect(
            [&](double z) { return 1.0 - normal_cdf((z - mean_a) / sd_a); }, 0.0, 1.0);
        e2 = gh.expect(
            [&](double z) {
                return 2.0 * normal_cdf(z) * (1.0 - normal_cdf((z - mean_a) / sd_a));
            },
            0.0, 1.0);
    }
    return e2 - e1 * e1;
}

Eigen::VectorXd gl_target_shapley(const GaussianLinearSpec& spec, const QuadratureConfig& quad) {
    const int d = static_cast<int>(spec.beta.size());
    const double p = gl_failure_probability(spec);
    const double var = p * (1.0 - p);
    const GaussHermite gh(quad.nodes); // one rule shared by all subsets
    return subset_aggregate(
        [&](const Subset& u) { return gl_target_closed_sobol(spec, u, gh); }, d, var);
}

} // namespace tshap
