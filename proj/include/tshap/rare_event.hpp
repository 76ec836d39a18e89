#pragma once

#include <cstdint>
#include <vector>

#include "tshap/input_model.hpp"
#include "tshap/problems.hpp"

namespace tshap {

struct ProbabilityEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long long n = 0;
    bool rare_warning = false; // no failure observed / all weights zero
};

/// Crude Monte Carlo failure probability with SE = sqrt(p(1-p)/N).
ProbabilityEstimate mc_failure_probability(const FailureProblem& problem, long long n, Rng& rng);

/// N input points drawn from an auxiliary density g, their failure
/// indicators, and the likelihood weights w(x) = psi(x) f(x)/g(x) with the
/// 0/0 = 0 convention (indicator 0, or f = 0 outside its support, gives
/// weight 0). This is the given-data substrate.
struct WeightedFailureSample {
    Eigen::MatrixXd points;            // N x d, drawn from g
    std::vector<std::uint8_t> indicators;
    Eigen::VectorXd weights;
    InputModelPtr f;
    InputModelPtr g;
    Eigen::MatrixXd search_points;     // geometry used for neighbour queries
    long long support_zeroed = 0;      // failure points where f vanished

    static WeightedFailureSample build(Eigen::MatrixXd points,
                                       std::vector<std::uint8_t> indicators, InputModelPtr f,
                                       InputModelPtr g);

    int size() const { return static_cast<int>(points.rows()); }
    int dim() const { return static_cast<int>(points.cols()); }
};

/// IS estimate of p_t: mean of the weights. Flags rarity when all weights
/// vanish. Unbiased when supp(g) covers supp(psi_t f).
ProbabilityEstimate is_failure_probability(const WeightedFailureSample& sample);

/// Unbiased IS estimate of p_t^2:
///   p_hat^2 - (1/(N-1)) [ (1/N) sum w^2 - p_hat^2 ].
double is_pt_squared_unbiased(const WeightedFailureSample& sample);

/// Unbiased estimate of Var(mean(z)) from one i.i.d. vector:
///   (1/(N-1)) [ (1/N) sum z^2 - zbar^2 ].
double variance_of_mean_unbiased(const Eigen::VectorXd& values);

struct CrossEntropyConfig {
    enum class Family { SingleGaussian, GaussianMixture };
    Family family = Family::SingleGaussian;
    int components = 2;        // mixture family only
    int samples_per_level = 2000;
    double elite_quantile = 0.1; // rho: elite fraction per level
    int max_levels = 20;
    double smoothing = 1.0;      // 1 = no smoothing
};

struct CrossEntropyDiagnostics {
    int levels = 0;
    bool reached_target = false;
    std::vector<double> thresholds;
    long long phi_calls = 0;
    bool covariance_floored = false;
    int pruned_components = 0;
};

struct CrossEntropyResult {
    InputModelPtr aux;             // fitted auxiliary density g
    WeightedFailureSample sample;  // final i.i.d. sample from g (may be empty)
    CrossEntropyDiagnostics diag;
};

/// Multilevel cross-entropy fit of the auxiliary density. Starts from the
/// input-model moments; each level draws samples_per_level points from the
/// current g, sets the level threshold to the (1-rho) empirical quantile of
/// phi capped at t, and refits by likelihood-weighted maximum likelihood on
/// the exceeding points. After the threshold reaches t, a final i.i.d.
/// sample of size final_sample_size is drawn from the fitted g and returned
/// as a WeightedFailureSample, ready for reuse by the given-data estimators.
CrossEntropyResult cross_entropy_fit(const FailureProblem& problem, const CrossEntropyConfig& cfg,
                                     int final_sample_size, Rng& rng);

} // namespace tshap
