#pragma once

#include <functional>

#include "tshap/input_model.hpp"
#include "tshap/problems.hpp"

namespace tshap {

/// Cost function over subsets: either T-VE_u or T-EV_u estimates. Both share
/// the endpoints c(empty) = 0 and c(full) = Var(psi), so the aggregation
/// formulas below never evaluate the supplied function at the endpoints.
using SubsetCostFn = std::function<double(const Subset&)>;

/// Increment c(prefix + {i}) - c(prefix) used by the permutation procedure.
using IncrementFn = std::function<double(const Subset& prefix, int i)>;

/// Subset procedure: evaluates the cost of every proper nonempty subset
/// exactly once and combines them with the binomial Shapley weights.
/// Throws AggregationError when the normalizer is not positive.
Eigen::VectorXd subset_aggregate(const SubsetCostFn& cost, int d, double normalizer);

/// Random-permutation procedure: averages cost increments along m uniform
/// permutations (d - 1 interior evaluations each). With `stratified` set,
/// m must equal d! and the exact expectation over all permutations is
/// computed by multiplicity collapse, reproducing subset_aggregate bit for
/// bit on cached increments; that mode exists for the exactness test.
Eigen::VectorXd permutation_aggregate(const IncrementFn& increment, int d, long long m,
                                      double normalizer, Rng& rng, bool stratified = false);

enum class VarianceScheme { Plugin, Mc };

struct NormalizerEstimate {
    double value = 0.0;
    double p_hat = 0.0;
    bool clamped = false; // IS p-hat fell outside [0,1] and was clamped
};

/// Var(psi) = p(1-p) from a failure-probability estimate; the estimate is
/// clamped into [0,1] (flagged) since IS weights can overshoot.
NormalizerEstimate indicator_variance_plugin(double p_hat);

/// Unbiased sample variance of the indicator over an n-point crude MC run.
NormalizerEstimate indicator_variance_mc(const FailureProblem& problem, long long n, Rng& rng);

/// Per-coordinate shift/scale z_i = (x_i - shift_i) / scale_i used as the
/// given-data preprocessing. Shapley effects are invariant under it; the
/// neighbour geometry is not, which is the point.
struct StandardizationMap {
    Eigen::VectorXd shift;
    Eigen::VectorXd scale;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
    Eigen::VectorXd apply_point(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd invert(const Eigen::MatrixXd& points) const;
};

/// Exact moments of a model (mean / sqrt of covariance diagonal).
StandardizationMap fit_standardization(const InputModel& h);
/// Empirical moments of a sample (one point per row).
StandardizationMap fit_standardization(const Eigen::MatrixXd& sample);

} // namespace tshap
