#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tshap/input_model.hpp"

namespace tshap {

class GaussianModel;

/// Precomputed machinery for repeated conditional draws of X_free given
/// different values of the complementary block. Holds the regression matrix
/// Sigma_{f,c} Sigma_{c,c}^{-1} and the Cholesky factor of the conditional
/// covariance (a Schur complement), so each draw is a matrix-vector product.
class GaussianConditional {
public:
    GaussianConditional(const GaussianModel& model, const Subset& free);

    const Subset& free() const { return free_; }

    Eigen::VectorXd mean_given(const Eigen::VectorXd& x_fixed) const;
    const Eigen::MatrixXd& covariance() const { return cond_cov_; }

    /// n draws of X_free | X_fixed = x_fixed (n x |free|).
    Eigen::MatrixXd sample(const Eigen::VectorXd& x_fixed, int n, Rng& rng) const;

    GaussianModel model_given(const Eigen::VectorXd& x_fixed) const;

private:
    Subset free_;
    Eigen::VectorXd mean_free_, mean_fixed_;
    Eigen::MatrixXd regression_; // Sigma_{free,fixed} Sigma_{fixed,fixed}^{-1}
    Eigen::MatrixXd cond_cov_;
    Eigen::MatrixXd cond_chol_; // lower factor of cond_cov_
};

/// Multivariate normal with SPD covariance. Construction runs a Cholesky
/// factorization and fails loudly if it does not succeed; near-singular
/// covariances are not jittered.
class GaussianModel final : public InputModel {
public:
    GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    int dim() const override { return static_cast<int>(mean_.size()); }
    double log_density(const Eigen::VectorXd& x) const override;
    double log_marginal_density(const Subset& v, const Eigen::VectorXd& x_v) const override;
    Eigen::MatrixXd sample(int n, Rng& rng) const override;
    Eigen::MatrixXd sample_conditional(const Subset& free, const Eigen::VectorXd& x_fixed,
                                       int n, Rng& rng) const override;
    Eigen::MatrixXd sample_marginal(const Subset& v, int n, Rng& rng) const override;
    Eigen::VectorXd mean() const override { return mean_; }
    Eigen::MatrixXd covariance() const override { return cov_; }

    const Eigen::VectorXd& mean_vector() const { return mean_; }
    const Eigen::MatrixXd& covariance_matrix() const { return cov_; }
    const Eigen::MatrixXd& cholesky_lower() const { return chol_; }

    GaussianModel marginal(const Subset& v) const;
    GaussianConditional conditional_generator(const Subset& free) const {
        return GaussianConditional(*this, free);
    }

    LogDensityFn marginal_log_density_fn(const Subset& v) const override;
    SamplerFn marginal_sampler_fn(const Subset& v) const override;
    ConditionalSamplerFn conditional_sampler_fn(const Subset& free) const override;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd chol_;
    double log_norm_ = 0.0; // -(d/2) log(2 pi) - 0.5 log det
};

/// Conditional law of X_u given X_{-u} = x_minus_u (Schur complement).
GaussianModel gaussian_conditional(const GaussianModel& model, const Subset& u,
                                   const Eigen::VectorXd& x_minus_u);

/// Standard normal CDF.
double normal_cdf(double x);

/// Probability that a N(mean, sd^2) variable lies in [lo, hi].
double normal_interval_probability(double mean, double sd, double lo, double hi);

} // namespace tshap
