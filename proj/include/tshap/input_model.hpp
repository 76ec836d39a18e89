#pragma once

#include <cmath>
#include <functional>
#include <memory>

#include <Eigen/Core>

#include "tshap/rng.hpp"
#include "tshap/subset.hpp"

namespace tshap {

/// A joint input distribution exposing everything the estimators need:
/// joint density, marginal densities over arbitrary coordinate subsets,
/// unconditional sampling, and conditional sampling of one block given
/// values on its complement.
///
/// Models are immutable after construction and safe to share across threads;
/// every sampling call takes its own generator.
class InputModel {
public:
    /// Reusable evaluators bound to one subset. The _fn factories let hot
    /// loops hoist the block decompositions (marginal extraction, Schur
    /// factors) out of the per-point work; results are identical to the
    /// plain virtuals.
    using LogDensityFn = std::function<double(const Eigen::VectorXd&)>;
    using SamplerFn = std::function<Eigen::MatrixXd(int, Rng&)>;
    using ConditionalSamplerFn =
        std::function<Eigen::MatrixXd(const Eigen::VectorXd& x_fixed, int n, Rng&)>;

    virtual ~InputModel() = default;

    virtual int dim() const = 0;

    /// log f(x); -inf outside the support.
    virtual double log_density(const Eigen::VectorXd& x) const = 0;

    /// log of the marginal density of X_v at x_v; -inf outside support.
    virtual double log_marginal_density(const Subset& v, const Eigen::VectorXd& x_v) const = 0;

    /// i.i.d. sample, one point per row (n x d). Deterministic given rng state.
    virtual Eigen::MatrixXd sample(int n, Rng& rng) const = 0;

    /// Draws of X_free | X_{comp(free)} = x_fixed, one per row (n x |free|).
    virtual Eigen::MatrixXd sample_conditional(const Subset& free, const Eigen::VectorXd& x_fixed,
                                               int n, Rng& rng) const = 0;

    /// Draws from the marginal of X_v (n x |v|). Default projects joint draws.
    virtual Eigen::MatrixXd sample_marginal(const Subset& v, int n, Rng& rng) const {
        Eigen::MatrixXd full = sample(n, rng);
        Eigen::MatrixXd out(n, v.size());
        const auto& m = v.members();
        for (int j = 0; j < v.size(); ++j) out.col(j) = full.col(m[j]);
        return out;
    }

    virtual Eigen::VectorXd mean() const = 0;
    virtual Eigen::MatrixXd covariance() const = 0;

    virtual LogDensityFn marginal_log_density_fn(const Subset& v) const {
        return [this, v](const Eigen::VectorXd& x_v) { return log_marginal_density(v, x_v); };
    }

    virtual SamplerFn marginal_sampler_fn(const Subset& v) const {
        return [this, v](int n, Rng& rng) { return sample_marginal(v, n, rng); };
    }

    virtual ConditionalSamplerFn conditional_sampler_fn(const Subset& free) const {
        return [this, free](const Eigen::VectorXd& x_fixed, int n, Rng& rng) {
            return sample_conditional(free, x_fixed, n, rng);
        };
    }

    double density(const Eigen::VectorXd& x) const { return std::exp(log_density(x)); }
    double marginal_density(const Subset& v, const Eigen::VectorXd& x_v) const {
        return std::exp(log_marginal_density(v, x_v));
    }
};

using InputModelPtr = std::shared_ptr<const InputModel>;

} // namespace tshap
