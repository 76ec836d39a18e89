#pragma once

#include <functional>

#include "tshap/problems.hpp"

namespace tshap {

struct QuadratureConfig {
    int nodes = 128;          // Gauss-Hermite node count, >= 32
    double tolerance = 1e-8;  // absolute error target for oracle values
};

/// Gauss-Hermite rule for weight exp(-x^2), built by Golub-Welsch.
/// expect() integrates h against a N(mean, sd^2) law.
class GaussHermite {
public:
    explicit GaussHermite(int n);

    const Eigen::VectorXd& nodes() const { return nodes_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    double expect(const std::function<double(double)>& h, double mean, double sd) const;

private:
    Eigen::VectorXd nodes_, weights_;
};

/// Exact failure probability of the Gaussian linear case:
/// 1 - Phi((t - beta' mu) / sqrt(beta' Sigma beta)).
double gl_failure_probability(const GaussianLinearSpec& spec);

/// Exact target closed Sobol index T-VE_u: Var[Phi(A)] where A is the
/// univariate Gaussian affine functional of X_u from the conditional-normal
/// reduction, computed as E[Phi(A)^2] - E[Phi(A)]^2 by quadrature; the
/// degenerate branch beta_{-u} = 0 returns p(1-p) exactly.
double gl_target_closed_sobol(const GaussianLinearSpec& spec, const Subset& u,
                              const QuadratureConfig& quad = {});
double gl_target_closed_sobol(const GaussianLinearSpec& spec, const Subset& u,
                              const GaussHermite& gh);

/// Exact target Shapley effects of the Gaussian linear case: subset
/// aggregation of the oracle T-VE values with normalizer p(1-p).
Eigen::VectorXd gl_target_shapley(const GaussianLinearSpec& spec,
                                  const QuadratureConfig& quad = {});

} // namespace tshap
