#include "tshap/gaussian.hpp"

#include <cmath>
#include <limits>

#include "tshap/errors.hpp"

namespace tshap {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::MatrixXd block(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                      const std::vector<int>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
    return out;
}

Eigen::MatrixXd spd_cholesky(const Eigen::MatrixXd& cov, const char* what) {
    if (cov.rows() != cov.cols()) throw ModelError(std::string(what) + ": covariance not square");
    if (!cov.isApprox(cov.transpose(), 1e-12))
        throw ModelError(std::string(what) + ": covariance not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw ModelError(std::string(what) + ": covariance not positive definite");
    return llt.matrixL();
}

} // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_interval_probability(double mean, double sd, double lo, double hi) {
    if (!(sd > 0.0)) throw ArgumentError("normal_interval_probability: sd must be positive");
    const double a = std::isinf(lo) ? 0.0 : normal_cdf((lo - mean) / sd);
    const double b = std::isinf(hi) ? 1.0 : normal_cdf((hi - mean) / sd);
    return std::max(0.0, b - a);
}

GaussianModel::GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
    if (cov_.rows() != mean_.size())
        throw ModelError("GaussianModel: mean/covariance dimension mismatch");
    chol_ = spd_cholesky(cov_, "GaussianModel");
    double log_det = 0.0;
    for (int i = 0; i < chol_.rows(); ++i) log_det += 2.0 * std::log(chol_(i, i));
    log_norm_ = -0.5 * (dim() * kLog2Pi + log_det);
}

double GaussianModel::log_density(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw ArgumentError("GaussianModel::log_density: dimension mismatch");
    Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return log_norm_ - 0.5 * z.squaredNorm();
}

double GaussianModel::log_marginal_density(const Subset& v, const Eigen::VectorXd& x_v) const {
    if (v.empty()) throw ArgumentError("GaussianModel: marginal over empty subset");
    if (v.is_full()) return log_density(x_v);
    return marginal(v).log_density(x_v);
}

GaussianModel GaussianModel::marginal(const Subset& v) const {
    if (v.dim() != dim()) throw ArgumentError("GaussianModel::marginal: subset dimension mismatch");
    const auto& m = v.members();
    return GaussianModel(v.gather(mean_), block(cov_, m, m));
}

Eigen::MatrixXd GaussianModel::sample(int n, Rng& rng) const {
    if (n < 1) throw ArgumentError("GaussianModel::sample: n must be >= 1");
    Eigen::MatrixXd out(n, dim());
    for (int i = 0; i < n; ++i)
        out.row(i) = (mean_ + chol_ * normal_vector(dim(), rng)).transpose();
    return out;
}

Eigen::MatrixXd GaussianModel::sample_marginal(const Subset& v, int n, Rng& rng) const {
    if (v.is_full()) return sample(n, rng);
    return marginal(v).sample(n, rng);
}

Eigen::MatrixXd GaussianModel::sample_conditional(const Subset& free, const Eigen::VectorXd& x_fixed,
                                                  int n, Rng& rng) const {
    return GaussianConditional(*this, free).sample(x_fixed, n, rng);
}

GaussianConditional::GaussianConditional(const GaussianModel& model, const Subset& free)
    : free_(free) {
    if (free.dim() != model.dim())
        throw ArgumentError("GaussianConditional: subset dimension mismatch");
    if (free.empty() || free.is_full())
        throw ArgumentError("GaussianConditional: free block must be a proper nonempty subset");
    const Subset fixed = free.complement();
    const auto& mu = model.mean_vector();
    const auto& S = model.covariance_matrix();
    mean_free_ = free.gather(mu);
    mean_fixed_ = fixed.gather(mu);
    Eigen::MatrixXd S_ff = block(S, free.members(), free.members());
    Eigen::MatrixXd S_fc = block(S, free.members(), fixed.members());
    Eigen::MatrixXd S_cc = block(S, fixed.members(), fixed.members());
    Eigen::LLT<Eigen::MatrixXd> llt(S_cc);
    if (llt.info() != Eigen::Success)
        throw ModelError("GaussianConditional: conditioning block not positive definite");
    regression_ = llt.solve(S_fc.transpose()).transpose();
    cond_cov_ = S_ff - regression_ * S_fc.transpose();
    cond_cov_ = 0.5 * (cond_cov_ + cond_cov_.transpose()); // symmetrize rounding
    cond_chol_ = spd_cholesky(cond_cov_, "GaussianConditional");
}

Eigen::VectorXd GaussianConditional::mean_given(const Eigen::VectorXd& x_fixed) const {
    if (x_fixed.size() != regression_.cols())
        throw ArgumentError("GaussianConditional: conditioning vector has wrong length");
    return mean_free_ + regression_ * (x_fixed - mean_fixed_);
}

Eigen::MatrixXd GaussianConditional::sample(const Eigen::VectorXd& x_fixed, int n, Rng& rng) const {
    Eigen::VectorXd m = mean_given(x_fixed);
    Eigen::MatrixXd out(n, free_.size());
    for (int i = 0; i < n; ++i)
        out.row(i) = (m + cond_chol_ * normal_vector(free_.size(), rng)).transpose();
    return out;
}

GaussianModel GaussianConditional::model_given(const Eigen::VectorXd& x_fixed) const {
    return GaussianModel(mean_given(x_fixed), cond_cov_);
}

GaussianModel gaussian_conditional(const GaussianModel& model, const Subset& u,
                                   const Eigen::VectorXd& x_minus_u) {
    return GaussianConditional(model, u).model_given(x_minus_u);
}

InputModel::LogDensityFn GaussianModel::marginal_log_density_fn(const Subset& v) const {
    if (v.is_full()) {
        return [this](const Eigen::VectorXd& x) { return log_density(x); };
    }
    auto m = std::make_shared<GaussianModel>(marginal(v));
    return [m](const Eigen::VectorXd& x_v) { return m->log_density(x_v); };
}

InputModel::SamplerFn GaussianModel::marginal_sampler_fn(const Subset& v) const {
    if (v.is_full()) {
        return [this](int n, Rng& rng) { return sample(n, rng); };
    }
    auto m = std::make_shared<GaussianModel>(marginal(v));
    return [m](int n, Rng& rng) { return m->sample(n, rng); };
}

InputModel::ConditionalSamplerFn GaussianModel::conditional_sampler_fn(const Subset& free) const {
    auto gen = std::make_shared<GaussianConditional>(*this, free);
    return [gen](const Eigen::VectorXd& x_fixed, int n, Rng& rng) {
        return gen->sample(x_fixed, n, rng);
    };
}

} // namespace tshap
