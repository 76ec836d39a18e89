#include "tshap/aggregation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

#include "tshap/errors.hpp"

namespace tshap {

namespace {

void check_aggregation_dim(int d) {
    if (d < 1 || d > 18)
        throw ArgumentError("aggregation: d must be in [1,18] for exhaustive procedures");
}

std::vector<double> factorial_table(int d) {
    std::vector<double> f(d + 1, 1.0);
    for (int i = 1; i <= d; ++i) f[i] = f[i - 1] * i;
    return f;
}

} // namespace

Eigen::VectorXd subset_aggregate(const SubsetCostFn& cost, int d, double normalizer) {
    check_aggregation_dim(d);
    if (!(normalizer > 0.0))
        throw AggregationError("subset_aggregate: normalizer must be positive");
    const std::uint32_t full = (d >= 31) ? ~0u : ((1u << d) - 1u);
    // Each proper nonempty subset is evaluated exactly once and cached.
    std::vector<double> c(full + 1, 0.0);
    c[full] = normalizer;
    for (std::uint32_t m = 1; m < full; ++m) c[m] = cost(Subset::from_mask(d, m));

    const std::vector<double> fact = factorial_table(d);
    Eigen::VectorXd sh = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) {
        const std::uint32_t bit = 1u << i;
        double acc = 0.0;
        for (std::uint32_t m = 0; m <= full; ++m) {
            if (m & bit) continue;
            const int r = std::popcount(m);
            // multiplicity |u|! (d-1-|u|)! of the pair (u, i) over permutations
            acc += fact[r] * fact[d - 1 - r] * (c[m | bit] - c[m]);
        }
        sh[i] = acc / (fact[d] * normalizer);
    }
    return sh;
}

Eigen::VectorXd permutation_aggregate(const IncrementFn& increment, int d, long long m,
                                      double normalizer, Rng& rng, bool stratified) {
    check_aggregation_dim(d);
    if (!(normalizer > 0.0))
        throw AggregationError("permutation_aggregate: normalizer must be positive");
    if (m < 1) throw ArgumentError("permutation_aggregate: m must be >= 1");
    const std::vector<double> fact = factorial_table(d);
    Eigen::VectorXd sh = Eigen::VectorXd::Zero(d);

    if (stratified) {
        // Exact expectation over all d! permutations: the pair (prefix u,
        // player i) occurs |u|! (d-1-|u|)! times, which collapses the
        // enumeration to the subset weights.
        if (static_cast<double>(m) != fact[d])
            throw ArgumentError("permutation_aggregate: stratified mode requires m = d!");
        const std::uint32_t full = (1u << d) - 1u;
        for (int i = 0; i < d; ++i) {
            const std::uint32_t bit = 1u << i;
            double acc = 0.0;
            for (std::uint32_t msk = 0; msk <= full; ++msk) {
                if (msk & bit) continue;
                const int r = std::popcount(msk);
                acc += fact[r] * fact[d - 1 - r] * increment(Subset::from_mask(d, msk), i);
            }
            sh[i] = acc / (fact[d] * normalizer);
        }
        return sh;
    }

    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    for (long long j = 0; j < m; ++j) {
        // Fisher-Yates with the caller's generator keeps runs reproducible.
        for (int k = d - 1; k > 0; --k) {
            const int swap_with = uniform_index(k + 1, rng);
            std::swap(perm[k], perm[swap_with]);
        }
        std::uint32_t prefix_mask = 0;
        for (int k = 0; k < d; ++k) {
            const int i = perm[k];
            sh[i] += increment(Subset::from_mask(d, prefix_mask), i);
            prefix_mask |= (1u << i);
        }
    }
    return sh / (static_cast<double>(m) * normalizer);
}

NormalizerEstimate indicator_variance_plugin(double p_hat) {
    NormalizerEstimate out;
    out.p_hat = p_hat;
    if (p_hat < 0.0 || p_hat > 1.0) {
        out.p_hat = std::clamp(p_hat, 0.0, 1.0);
        out.clamped = true;
    }
    out.value = out.p_hat * (1.0 - out.p_hat);
    return out;
}

NormalizerEstimate indicator_variance_mc(const FailureProblem& problem, long long n, Rng& rng) {
    if (n < 2) throw ArgumentError("indicator_variance_mc: needs n >= 2");
    long long hits = 0;
    const int chunk = 8192;
    long long done = 0;
    while (done < n) {
        const int m255 = static_cast<int>(std::min<long long>(chunk, n - done));
        Eigen::MatrixXd pts = problem.input->sample(m255, rng);
        for (int i = 0; i < m255; ++i)
            if (problem.failure(pts.row(i).transpose())) ++hits;
        done += m255;
    }
    NormalizerEstimate out;
    out.p_hat = static_cast<double>(hits) / static_cast<double>(n);
    // unbiased sample variance of a 0/1 vector
    out.value = static_cast<double>(n) / (n - 1) * out.p_hat * (1.0 - out.p_hat);
    return out;
}

Eigen::MatrixXd StandardizationMap::apply(const Eigen::MatrixXd& points) const {
    Eigen::MatrixXd out(points.rows(), points.cols());
    for (int j = 0; j < points.cols(); ++j)
        out.col(j) = (points.col(j).array() - shift[j]) / scale[j];
    return out;
}

Eigen::VectorXd StandardizationMap::apply_point(const Eigen::VectorXd& x) const {
    return (x - shift).cwiseQuotient(scale);
}

Eigen::MatrixXd StandardizationMap::invert(const Eigen::MatrixXd& points) const {
    Eigen::MatrixXd out(points.rows(), points.cols());
    for (int j = 0; j < points.cols(); ++j)
        out.col(j) = points.col(j).array() * scale[j] + shift[j];
    return out;
}

namespace {

StandardizationMap make_map(Eigen::VectorXd shift, Eigen::VectorXd var) {
    StandardizationMap map;
    map.shift = std::move(shift);
    map.scale.resize(var.size());
    for (int i = 0; i < var.size(); ++i) {
        if (!(var[i] > 0.0) || !std::isfinite(var[i]))
            throw StandardizationError("standardization: coordinate " + std::to_string(i + 1) +
                                       " has non-positive variance");
        map.scale[i] = std::sqrt(var[i]);
    }
    return map;
}

} // namespace

StandardizationMap fit_standardization(const InputModel& h) {
    return make_map(h.mean(), h.covariance().diagonal());
}

StandardizationMap fit_standardization(const Eigen::MatrixXd& sample) {
    if (sample.rows() < 2) throw StandardizationError("standardization: needs >= 2 points");
    Eigen::VectorXd mean = sample.colwise().mean();
    Eigen::VectorXd var = (sample.rowwise() - mean.transpose()).array().square().colwise().sum() /
                          static_cast<double>(sample.rows() - 1);
    return make_map(std::move(mean), std::move(var));
}

} // namespace tshap
