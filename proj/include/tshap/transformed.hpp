#pragma once

#include <vector>

#include "tshap/gaussian.hpp"

namespace tshap {

/// Strictly increasing map from a latent coordinate z to a physical
/// coordinate x. The supported forms cover every benchmark marginal:
/// identity, affine a*z+b (a>0), exp, and scaled exponential a*exp(z) (a>0).
struct CoordinateMap {
    enum class Kind { Identity, Affine, Exp, ScaledExp };

    Kind kind = Kind::Identity;
    double a = 1.0;
    double b = 0.0;

    static CoordinateMap identity() { return {}; }
    static CoordinateMap affine(double a, double b) { return {Kind::Affine, a, b}; }
    static CoordinateMap exponential() { return {Kind::Exp, 1.0, 0.0}; }
    static CoordinateMap scaled_exp(double a) { return {Kind::ScaledExp, a, 0.0}; }

    double forward(double z) const;
    /// Inverse map; NaN when x is outside the range of the map.
    double inverse(double x) const;
    /// log |dz/dx| at x (assumes x in range).
    double log_jacobian(double x) const;
    bool in_range(double x) const;
};

/// Physical-space acceptance interval for one coordinate (closed on both
/// ends; infinities mean unbounded).
struct CoordinateBounds {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool active() const { return std::isfinite(lo) || std::isfinite(hi); }
};

/// Exact physical mean/covariance of coordinate-wise maps of a Gaussian
/// (identity/affine pass through, exponentials use the lognormal formulas).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> mapped_gaussian_moments(
    const GaussianModel& latent, const std::vector<CoordinateMap>& maps);

/// Input model built from a latent Gaussian by coordinate-wise monotone maps,
/// optionally truncated to a box in physical space. The density is
/// (latent density x Jacobian) / acceptance inside the box and 0 outside.
///
/// Truncation is only supported when every bounded coordinate sits in its own
/// dependence component of the latent covariance: then the acceptance mass
/// and the per-subset marginal corrections factor into one-dimensional normal
/// interval probabilities and all densities stay exact. Models violating this
/// are rejected at construction, as are non-coordinate-wise transforms by
/// type construction.
class TransformedInputModel final : public InputModel {
public:
    TransformedInputModel(GaussianModel latent, std::vector<CoordinateMap> maps,
                          std::vector<CoordinateBounds> bounds = {},
                          std::uint64_t probe_seed = 0x7f4a7c15u, int probe_n = 1000000);

    int dim() const override { return latent_.dim(); }
    double log_density(const Eigen::VectorXd& x) const override;
    double log_marginal_density(const Subset& v, const Eigen::VectorXd& x_v) const override;
    Eigen::MatrixXd sample(int n, Rng& rng) const override;
    Eigen::MatrixXd sample_conditional(const Subset& free, const Eigen::VectorXd& x_fixed,
                                       int n, Rng& rng) const override;
    Eigen::VectorXd mean() const override { return mean_; }
    Eigen::MatrixXd covariance() const override { return cov_; }

    const GaussianModel& latent() const { return latent_; }
    const std::vector<CoordinateMap>& maps() const { return maps_; }
    const std::vector<CoordinateBounds>& bounds() const { return bounds_; }

    /// Probability mass of the accepted region (exact factorized value).
    double acceptance() const { return acceptance_; }
    /// Monte Carlo cross-check of the acceptance mass and its standard error.
    double acceptance_mc() const { return acceptance_mc_; }
    double acceptance_mc_se() const { return acceptance_se_; }
    bool truncated() const { return !bounded_coords_.empty(); }

    bool domain_contains(const Eigen::VectorXd& x) const;

    Eigen::VectorXd to_physical(const Eigen::VectorXd& z) const;
    /// Latent preimage; throws ArgumentError when x is outside the map range.
    Eigen::VectorXd to_latent(const Eigen::VectorXd& x) const;

    LogDensityFn marginal_log_density_fn(const Subset& v) const override;
    ConditionalSamplerFn conditional_sampler_fn(const Subset& free) const override;

private:
    struct LatentBox {
        double lo, hi;
    };

    double log_conditional_box_mass(int coord, const Subset& v, const Eigen::VectorXd& z_v) const;
    void run_probe(std::uint64_t probe_seed, int probe_n);
    void exact_moments();

    GaussianModel latent_;
    std::vector<CoordinateMap> maps_;
    std::vector<CoordinateBounds> bounds_;
    std::vector<LatentBox> latent_boxes_;
    std::vector<int> bounded_coords_;
    std::vector<int> component_of_;              // dependence component id per coordinate
    std::vector<std::vector<int>> components_;   // members per component id
    double acceptance_ = 1.0;
    double log_acceptance_ = 0.0;
    double acceptance_mc_ = 1.0;
    double acceptance_se_ = 0.0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
};

} // namespace tshap
