#pragma once

#include <optional>

#include "tshap/knn.hpp"
#include "tshap/rare_event.hpp"

namespace tshap {

enum class IndexKind { TEV, TVE };

struct EstimatorScheme {
    enum class Family { Dmc, Pf };
    enum class Regime { GivenModel, GivenData };
    Family family = Family::Dmc;
    Regime regime = Regime::GivenModel;
    bool importance = false;
};

/// One estimate of T-EV_u or T-VE_u together with its budget and the
/// diagnostics needed by the variance studies and the 0/0 accounting.
struct ConditionalIndexEstimate {
    double value = 0.0;
    Subset subset;
    IndexKind kind = IndexKind::TEV;
    EstimatorScheme scheme;
    int n_outer = 0;
    int n_inner = 0;
    /// Pick-Freeze: the product-mean term before subtracting the p^2 plug-in.
    /// Double MC (IS forms): the estimate of E[E(psi|X_-u)^2] that is
    /// subtracted from the p_t plug-in.
    double first_term = 0.0;
    /// Mean over the outer loop of the inner weight means.
    double cloud_mean = 0.0;
    /// Double-MC IS forms: mean of the inner-loop bias-correction terms, so
    /// first_term + bias_estimate is the uncorrected estimate of E[E^2].
    double bias_estimate = 0.0;
    long long zeroed_terms = 0;   // terms set to 0 by the 0/0 convention
    long long support_errors = 0; // f-marginal vanished under a nonzero term
    long long phi_calls = 0;
};

/// Lazy per-point neighbour lists over one KnnIndex for a fixed k. Shared by
/// replications that subsample the same stored points.
class NeighborTable {
public:
    NeighborTable(const KnnIndex& index, int k) : index_(index), k_(k), cache_(index.size()) {}

    int k() const { return k_; }

    const std::vector<int>& get(int l) {
        auto& slot = cache_[l];
        if (slot.empty()) slot = index_.query(l, k_);
        return slot;
    }

private:
    const KnnIndex& index_;
    int k_;
    std::vector<std::vector<int>> cache_;
};

/// Optional acceleration handles for the given-data estimators; when absent,
/// the estimator builds its own index over the sample's search geometry.
struct KnnContext {
    const KnnIndex* index = nullptr;
    NeighborTable* table = nullptr;
};

// --- given-model, sampling from the input distribution ---

/// Double Monte Carlo estimate of T-EV_u: outer draws of X_-u, inner
/// conditional draws of X_u, inner sample variance with 1/(N_I - 1).
/// Unbiased; costs n_outer * n_inner calls to phi.
ConditionalIndexEstimate t_ev_dmc_given_model(const FailureProblem& problem,
                                              const InputModel& model, const Subset& u,
                                              int n_outer, int n_inner, Rng& rng);

/// Pick-Freeze estimate of T-VE_u: mean of psi(X_u, X'_-u) psi(X_u, X''_-u)
/// minus the supplied p_t^2 plug-in. Costs 2 * n_outer calls.
ConditionalIndexEstimate t_ve_pf_given_model(const FailureProblem& problem,
                                             const InputModel& model, const Subset& u,
                                             int n_outer, double pt_sq_estimate, Rng& rng);

// --- given-model, importance sampling from an auxiliary density g ---

/// IS double Monte Carlo estimate of T-EV_u with the inner-loop bias
/// correction. `pt_is` is the IS failure-probability estimate from the
/// reliability sample. When `reuse` is given, outer points are subsampled
/// from it and its stored weight serves as inner draw #1, saving n_outer
/// calls (cost n_outer * (n_inner - 1) instead of n_outer * n_inner).
ConditionalIndexEstimate t_ev_dmc_is_given_model(const FailureProblem& problem,
                                                 const InputModel& f, const InputModel& g,
                                                 const Subset& u, int n_outer, int n_inner,
                                                 double pt_is, Rng& rng,
                                                 const WeightedFailureSample* reuse = nullptr);

/// IS Pick-Freeze estimate of T-VE_u. `pt_sq_unbiased` is the unbiased IS
/// estimate of p_t^2. With `reuse`, the subsampled point provides the first
/// Pick-Freeze leg (cost n_outer instead of 2 * n_outer).
ConditionalIndexEstimate t_ve_pf_is_given_model(const FailureProblem& problem,
                                                const InputModel& f, const InputModel& g,
                                                const Subset& u, int n_outer,
                                                double pt_sq_unbiased, Rng& rng,
                                                const WeightedFailureSample* reuse = nullptr);

// --- given-data, nearest-neighbour surrogates; zero additional phi calls ---

/// IS double Monte Carlo with the conditional cloud approximated by the
/// n_inner nearest neighbours of the subsampled point in subspace -u.
ConditionalIndexEstimate t_ev_dmc_is_knn(const WeightedFailureSample& sample, const Subset& u,
                                         int n_outer, int n_inner, Rng& rng,
                                         KnnContext ctx = {});

/// IS Pick-Freeze with the two legs taken at the two nearest neighbours of
/// the subsampled point in subspace u.
ConditionalIndexEstimate t_ve_pf_is_knn(const WeightedFailureSample& sample, const Subset& u,
                                        int n_outer, Rng& rng, KnnContext ctx = {});

// --- given-data baselines without importance sampling ---
// These operate on a plain (points, indicators) sample drawn from the input
// distribution itself; no density evaluations are involved.

ConditionalIndexEstimate t_ev_dmc_knn_plain(const Eigen::MatrixXd& search_points,
                                            const std::vector<std::uint8_t>& indicators,
                                            const Subset& u, int n_outer, int n_inner, Rng& rng,
                                            KnnContext ctx = {});

ConditionalIndexEstimate t_ve_pf_knn_plain(const Eigen::MatrixXd& search_points,
                                           const std::vector<std::uint8_t>& indicators,
                                           const Subset& u, int n_outer, double pt_sq_estimate,
                                           Rng& rng, KnnContext ctx = {});

} // namespace tshap
