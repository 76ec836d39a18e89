#include "tshap/mixture.hpp"

#include <cmath>
#include <limits>

#include "tshap/errors.hpp"

namespace tshap {

namespace {

double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (std::isinf(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

int draw_component(const std::vector<double>& weights, Rng& rng) {
    double u = uniform01(rng);
    double acc = 0.0;
    for (size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        if (u <= acc) return static_cast<int>(k);
    }
    return static_cast<int>(weights.size()) - 1;
}

} // namespace

GaussianMixtureModel::GaussianMixtureModel(std::vector<double> weights,
                                           std::vector<GaussianModel> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
    if (components_.empty()) throw ModelError("GaussianMixtureModel: needs >= 1 component");
    if (weights_.size() != components_.size())
        throw ModelError("GaussianMixtureModel: weights/components size mismatch");
    double sum = 0.0;
    for (double w : weights_) {
        if (w < 0.0) throw ModelError("GaussianMixtureModel: negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw ModelError("GaussianMixtureModel: weights must sum to 1 within 1e-12");
    for (const auto& c : components_)
        if (c.dim() != components_[0].dim())
            throw ModelError("GaussianMixtureModel: inconsistent component dimensions");
    log_weights_.resize(weights_.size());
    for (size_t k = 0; k < weights_.size(); ++k)
        log_weights_[k] = weights_[k] > 0.0 ? std::log(weights_[k])
                                            : -std::numeric_limits<double>::infinity();
}

double GaussianMixtureModel::log_density(const Eigen::VectorXd& x) const {
    std::vector<double> terms(components_.size());
    for (size_t k = 0; k < components_.size(); ++k)
        terms[k] = log_weights_[k] + components_[k].log_density(x);
    return log_sum_exp(terms);
}

double GaussianMixtureModel::log_marginal_density(const Subset& v,
                                                  const Eigen::VectorXd& x_v) const {
    if (v.empty()) throw ArgumentError("GaussianMixtureModel: marginal over empty subset");
    if (v.is_full()) return log_density(x_v);
    std::vector<double> terms(components_.size());
    for (size_t k = 0; k < components_.size(); ++k)
        terms[k] = log_weights_[k] + components_[k].log_marginal_density(v, x_v);
    return log_sum_exp(terms);
}

Eigen::MatrixXd GaussianMixtureModel::sample(int n, Rng& rng) const {
    if (n < 1) throw ArgumentError("GaussianMixtureModel::sample: n must be >= 1");
    Eigen::MatrixXd out(n, dim());
    for (int i = 0; i < n; ++i)
        out.row(i) = components_[draw_component(weights_, rng)].sample(1, rng).row(0);
    return out;
}

Eigen::MatrixXd GaussianMixtureModel::sample_marginal(const Subset& v, int n, Rng& rng) const {
    if (v.is_full()) return sample(n, rng);
    return marginal(v).sample(n, rng);
}

Eigen::MatrixXd GaussianMixtureModel::sample_conditional(const Subset& free,
                                                         const Eigen::VectorXd& x_fixed,
                                                         int n, Rng& rng) const {
    return mixture_conditional(*this, free, x_fixed).sample(n, rng);
}

GaussianMixtureModel GaussianMixtureModel::marginal(const Subset& v) const {
    std::vector<GaussianModel> comps;
    comps.reserve(components_.size());
    for (const auto& c : components_) comps.push_back(c.marginal(v));
    return GaussianMixtureModel(weights_, std::move(comps));
}

Eigen::VectorXd GaussianMixtureModel::mean() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
    for (size_t k = 0; k < components_.size(); ++k)
        m += weights_[k] * components_[k].mean_vector();
    return m;
}

Eigen::MatrixXd GaussianMixtureModel::covariance() const {
    Eigen::VectorXd m = mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim(), dim());
    for (size_t k = 0; k < components_.size(); ++k) {
        const Eigen::VectorXd d = components_[k].mean_vector() - m;
        cov += weights_[k] * (components_[k].covariance_matrix() + d * d.transpose());
    }
    return cov;
}

InputModel::LogDensityFn GaussianMixtureModel::marginal_log_density_fn(const Subset& v) const {
    if (v.is_full()) {
        return [this](const Eigen::VectorXd& x) { return log_density(x); };
    }
    auto m = std::make_shared<GaussianMixtureModel>(marginal(v));
    return [m](const Eigen::VectorXd& x_v) { return m->log_density(x_v); };
}

InputModel::SamplerFn GaussianMixtureModel::marginal_sampler_fn(const Subset& v) const {
    if (v.is_full()) {
        return [this](int n, Rng& rng) { return sample(n, rng); };
    }
    auto m = std::make_shared<GaussianMixtureModel>(marginal(v));
    return [m](int n, Rng& rng) { return m->sample(n, rng); };
}

InputModel::ConditionalSamplerFn GaussianMixtureModel::conditional_sampler_fn(
    const Subset& free) const {
    // Hoist the per-component Schur factors and fixed-block marginals; the
    // per-call work is the posterior reweighting and the draws themselves.
    struct Prepared {
        std::vector<double> log_w;
        std::vector<GaussianConditional> gens;
        std::vector<GaussianModel> fixed_marginals;
        int free_size;
    };
    auto prep = std::make_shared<Prepared>();
    const Subset fixed = free.complement();
    prep->free_size = free.size();
    prep->log_w = log_weights_;
    for (const auto& c : components_) {
        prep->gens.emplace_back(c, free);
        prep->fixed_marginals.push_back(c.marginal(fixed));
    }
    return [prep](const Eigen::VectorXd& x_fixed, int n, Rng& rng) {
        const int k = static_cast<int>(prep->gens.size());
        std::vector<double> log_post(k);
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            log_post[c] = prep->log_w[c] + prep->fixed_marginals[c].log_density(x_fixed);
            mx = std::max(mx, log_post[c]);
        }
        if (std::isinf(mx))
            throw DegenerateConditionalError(
                "conditional_sampler_fn: all component marginals vanish");
        double lse = 0.0;
        for (int c = 0; c < k; ++c) lse += std::exp(log_post[c] - mx);
        lse = mx + std::log(lse);
        std::vector<double> post(k);
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
            post[c] = std::exp(log_post[c] - lse);
            sum += post[c];
        }
        for (double& w : post) w /= sum;
        Eigen::MatrixXd out(n, prep->free_size);
        for (int i = 0; i < n; ++i) {
            const int c = draw_component(post, rng);
            out.row(i) = prep->gens[c].sample(x_fixed, 1, rng).row(0);
        }
        return out;
    };
}

GaussianMixtureModel mixture_conditional(const GaussianMixtureModel& model, const Subset& u,
                                         const Eigen::VectorXd& x_minus_u) {
    const Subset fixed = u.complement();
    const int K = model.component_count();
    std::vector<double> log_post(K);
    std::vector<GaussianModel> comps;
    comps.reserve(K);
    for (int k = 0; k < K; ++k) {
        const auto& c = model.components()[k];
        log_post[k] = (model.weights()[k] > 0.0 ? std::log(model.weights()[k])
                                                : -std::numeric_limits<double>::infinity()) +
                      c.log_marginal_density(fixed, x_minus_u);
        comps.push_back(gaussian_conditional(c, u, x_minus_u));
    }
    const double lse = log_sum_exp(log_post);
    if (std::isinf(lse))
        throw DegenerateConditionalError(
            "mixture_conditional: all component marginal densities vanish at the conditioning point");
    std::vector<double> post(K);
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
        post[k] = std::exp(log_post[k] - lse);
        sum += post[k];
    }
    for (double& w : post) w /= sum;
    return GaussianMixtureModel(std::move(post), std::move(comps));
}

} // namespace tshap
