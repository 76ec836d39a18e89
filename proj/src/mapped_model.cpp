#include "tshap/mapped_model.hpp"

#include <cmath>

#include "tshap/errors.hpp"

namespace tshap {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

MappedModel::MappedModel(InputModelPtr latent, std::vector<CoordinateMap> maps)
    : latent_(std::move(latent)), maps_(std::move(maps)) {
    if (!latent_) throw ModelError("MappedModel: null latent model");
    if (static_cast<int>(maps_.size()) != latent_->dim())
        throw ModelError("MappedModel: one map per coordinate required");
    for (const auto& m : maps_)
        if ((m.kind == CoordinateMap::Kind::Affine || m.kind == CoordinateMap::Kind::ScaledExp) &&
            !(m.a > 0.0))
            throw ModelError("MappedModel: map scale must be positive");
}

double MappedModel::log_density(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw ArgumentError("MappedModel: dimension mismatch");
    double log_jac = 0.0;
    Eigen::VectorXd z(dim());
    for (int i = 0; i < dim(); ++i) {
        if (!maps_[i].in_range(x[i])) return -kInf;
        z[i] = maps_[i].inverse(x[i]);
        log_jac += maps_[i].log_jacobian(x[i]);
    }
    return latent_->log_density(z) + log_jac;
}

double MappedModel::log_marginal_density(const Subset& v, const Eigen::VectorXd& x_v) const {
    if (v.empty()) throw ArgumentError("MappedModel: marginal over empty subset");
    const auto& vm = v.members();
    double log_jac = 0.0;
    Eigen::VectorXd z_v(v.size());
    for (int k = 0; k < v.size(); ++k) {
        if (!maps_[vm[k]].in_range(x_v[k])) return -kInf;
        z_v[k] = maps_[vm[k]].inverse(x_v[k]);
        log_jac += maps_[vm[k]].log_jacobian(x_v[k]);
    }
    return (v.is_full() ? latent_->log_density(z_v) : latent_->log_marginal_density(v, z_v)) +
           log_jac;
}

Eigen::MatrixXd MappedModel::map_rows(Eigen::MatrixXd z, const std::vector<int>& coords) const {
    for (int i = 0; i < z.rows(); ++i)
        for (size_t k = 0; k < coords.size(); ++k)
            z(i, static_cast<int>(k)) = maps_[coords[k]].forward(z(i, static_cast<int>(k)));
    return z;
}

Eigen::MatrixXd MappedModel::sample(int n, Rng& rng) const {
    std::vector<int> all(dim());
    for (int i = 0; i < dim(); ++i) all[i] = i;
    return map_rows(latent_->sample(n, rng), all);
}

Eigen::MatrixXd MappedModel::sample_marginal(const Subset& v, int n, Rng& rng) const {
    return map_rows(latent_->sample_marginal(v, n, rng), v.members());
}

Eigen::MatrixXd MappedModel::sample_conditional(const Subset& free, const Eigen::VectorXd& x_fixed,
                                                int n, Rng& rng) const {
    return conditional_sampler_fn(free)(x_fixed, n, rng);
}

Eigen::VectorXd MappedModel::mean() const {
    const auto* g = dynamic_cast<const GaussianModel*>(latent_.get());
    if (!g) throw Error("MappedModel: exact moments need a Gaussian latent");
    return mapped_gaussian_moments(*g, maps_).first;
}

Eigen::MatrixXd MappedModel::covariance() const {
    const auto* g = dynamic_cast<const GaussianModel*>(latent_.get());
    if (!g) throw Error("MappedModel: exact moments need a Gaussian latent");
    return mapped_gaussian_moments(*g, maps_).second;
}

InputModel::LogDensityFn MappedModel::marginal_log_density_fn(const Subset& v) const {
    auto latent_fn = latent_->marginal_log_density_fn(v);
    const auto* self = this;
    const std::vector<int> vm = v.members();
    return [self, latent_fn, vm](const Eigen::VectorXd& x_v) {
        double log_jac = 0.0;
        Eigen::VectorXd z_v(static_cast<int>(vm.size()));
        for (size_t k = 0; k < vm.size(); ++k) {
            const double xk = x_v[static_cast<int>(k)];
            if (!self->maps_[vm[k]].in_range(xk)) return -kInf;
            z_v[static_cast<int>(k)] = self->maps_[vm[k]].inverse(xk);
            log_jac += self->maps_[vm[k]].log_jacobian(xk);
        }
        return latent_fn(z_v) + log_jac;
    };
}

InputModel::ConditionalSamplerFn MappedModel::conditional_sampler_fn(const Subset& free) const {
    const Subset fixed = free.complement();
    auto latent_cond = latent_->conditional_sampler_fn(free);
    const auto* self = this;
    const std::vector<int> fm = fixed.members();
    const std::vector<int> freem = free.members();
    return [self, latent_cond, fm, freem](const Eigen::VectorXd& x_fixed, int n, Rng& rng) {
        Eigen::VectorXd z_fixed(static_cast<int>(fm.size()));
        for (size_t k = 0; k < fm.size(); ++k) {
            const double xk = x_fixed[static_cast<int>(k)];
            if (!self->maps_[fm[k]].in_range(xk))
                throw ArgumentError("MappedModel: conditioning point outside map range");
            z_fixed[static_cast<int>(k)] = self->maps_[fm[k]].inverse(xk);
        }
        Eigen::MatrixXd z = latent_cond(z_fixed, n, rng);
        for (int i = 0; i < n; ++i)
            for (size_t k = 0; k < freem.size(); ++k)
                z(i, static_cast<int>(k)) = self->maps_[freem[k]].forward(z(i, static_cast<int>(k)));
        return z;
    };
}

} // namespace tshap
