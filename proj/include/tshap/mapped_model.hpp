#pragma once

#include "tshap/transformed.hpp"

namespace tshap {

/// A latent model pushed through strictly increasing coordinate-wise maps,
/// without truncation: density = latent(z(x)) |dz/dx|, marginals and
/// conditionals inherit from the latent block operations. Used for
/// importance-sampling auxiliary densities fitted in the latent space of a
/// transformed input model (their support is all of R^d as the maps allow,
/// matching the extended-domain convention).
class MappedModel final : public InputModel {
public:
    MappedModel(InputModelPtr latent, std::vector<CoordinateMap> maps);

    int dim() const override { return latent_->dim(); }
    double log_density(const Eigen::VectorXd& x) const override;
    double log_marginal_density(const Subset& v, const Eigen::VectorXd& x_v) const override;
    Eigen::MatrixXd sample(int n, Rng& rng) const override;
    Eigen::MatrixXd sample_conditional(const Subset& free, const Eigen::VectorXd& x_fixed,
                                       int n, Rng& rng) const override;
    Eigen::MatrixXd sample_marginal(const Subset& v, int n, Rng& rng) const override;
    Eigen::VectorXd mean() const override;
    Eigen::MatrixXd covariance() const override;

    LogDensityFn marginal_log_density_fn(const Subset& v) const override;
    ConditionalSamplerFn conditional_sampler_fn(const Subset& free) const override;

    const InputModel& latent() const { return *latent_; }
    InputModelPtr latent_ptr() const { return latent_; }
    const std::vector<CoordinateMap>& maps() const { return maps_; }

private:
    Eigen::MatrixXd map_rows(Eigen::MatrixXd z, const std::vector<int>& coords) const;

    InputModelPtr latent_;
    std::vector<CoordinateMap> maps_;
};

} // namespace tshap
