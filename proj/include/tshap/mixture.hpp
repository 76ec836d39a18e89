#pragma once

#include <vector>

#include "tshap/gaussian.hpp"

namespace tshap {

/// Finite Gaussian mixture. Weights form a simplex (checked to 1e-12);
/// components share one dimension. Marginalization and conditioning are
/// exact: conditionals reweight components by their marginal density at the
/// conditioning point, no approximate Gibbs steps.
class GaussianMixtureModel final : public InputModel {
public:
    GaussianMixtureModel(std::vector<double> weights, std::vector<GaussianModel> components);

    int dim() const override { return components_[0].dim(); }
    double log_density(const Eigen::VectorXd& x) const override;
    double log_marginal_density(const Subset& v, const Eigen::VectorXd& x_v) const override;
    Eigen::MatrixXd sample(int n, Rng& rng) const override;
    Eigen::MatrixXd sample_conditional(const Subset& free, const Eigen::VectorXd& x_fixed,
                                       int n, Rng& rng) const override;
    Eigen::MatrixXd sample_marginal(const Subset& v, int n, Rng& rng) const override;
    Eigen::VectorXd mean() const override;
    Eigen::MatrixXd covariance() const override;

    int component_count() const { return static_cast<int>(components_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<GaussianModel>& components() const { return components_; }

    GaussianMixtureModel marginal(const Subset& v) const;

    LogDensityFn marginal_log_density_fn(const Subset& v) const override;
    SamplerFn marginal_sampler_fn(const Subset& v) const override;
    ConditionalSamplerFn conditional_sampler_fn(const Subset& free) const override;

private:
    std::vector<double> weights_;
    std::vector<GaussianModel> components_;
    std::vector<double> log_weights_;
};

/// Conditional law of X_u given X_{-u} = x_minus_u: component-wise Gaussian
/// conditioning with weights proportional to (old weight) x (component
/// marginal density at x_minus_u), renormalized. Throws
/// DegenerateConditionalError when every component marginal vanishes.
GaussianMixtureModel mixture_conditional(const GaussianMixtureModel& model, const Subset& u,
                                         const Eigen::VectorXd& x_minus_u);

} // namespace tshap
