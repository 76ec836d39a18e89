#include "tshap/transformed.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "tshap/errors.hpp"

namespace tshap {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double CoordinateMap::forward(double z) const {
    switch (kind) {
        case Kind::Identity: return z;
        case Kind::Affine: return a * z + b;
        case Kind::Exp: return std::exp(z);
        case Kind::ScaledExp: return a * std::exp(z);
    }
    return z;
}

double CoordinateMap::inverse(double x) const {
    switch (kind) {
        case Kind::Identity: return x;
        case Kind::Affine: return (x - b) / a;
        case Kind::Exp: return x > 0.0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN();
        case Kind::ScaledExp:
            return x > 0.0 ? std::log(x / a) : std::numeric_limits<double>::quiet_NaN();
    }
    return x;
}

double CoordinateMap::log_jacobian(double x) const {
    switch (kind) {
        case Kind::Identity: return 0.0;
        case Kind::Affine: return -std::log(a);
        case Kind::Exp:
        case Kind::ScaledExp: return -std::log(x); // dz/dx = 1/x
    }
    return 0.0;
}

bool CoordinateMap::in_range(double x) const {
    switch (kind) {
        case Kind::Identity:
        case Kind::Affine: return std::isfinite(x);
        case Kind::Exp:
        case Kind::ScaledExp: return x > 0.0 && std::isfinite(x);
    }
    return false;
}

TransformedInputModel::TransformedInputModel(GaussianModel latent, std::vector<CoordinateMap> maps,
                                             std::vector<CoordinateBounds> bounds,
                                             std::uint64_t probe_seed, int probe_n)
    : latent_(std::move(latent)), maps_(std::move(maps)), bounds_(std::move(bounds)) {
    const int d = latent_.dim();
    if (static_cast<int>(maps_.size()) != d)
        throw ModelError("TransformedInputModel: one map per coordinate required");
    if (bounds_.empty()) bounds_.assign(d, CoordinateBounds{});
    if (static_cast<int>(bounds_.size()) != d)
        throw ModelError("TransformedInputModel: one bounds entry per coordinate required");
    for (const auto& m : maps_) {
        if ((m.kind == CoordinateMap::Kind::Affine || m.kind == CoordinateMap::Kind::ScaledExp) &&
            !(m.a > 0.0))
            throw ModelError("TransformedInputModel: map scale must be positive");
    }

    // Latent acceptance boxes implied by the physical bounds.
    latent_boxes_.resize(d);
    for (int i = 0; i < d; ++i) {
        double zlo = -kInf, zhi = kInf;
        const auto& b = bounds_[i];
        const auto& m = maps_[i];
        const bool exp_like =
            m.kind == CoordinateMap::Kind::Exp || m.kind == CoordinateMap::Kind::ScaledExp;
        if (std::isfinite(b.lo)) {
            if (exp_like && b.lo <= 0.0) {
                zlo = -kInf; // x > 0 already guaranteed by the map range
            } else {
                zlo = m.inverse(b.lo);
            }
        }
        if (std::isfinite(b.hi)) {
            if (exp_like && b.hi <= 0.0)
                throw ModelError("TransformedInputModel: empty acceptance interval");
            zhi = m.inverse(b.hi);
        }
        if (!(zlo < zhi)) throw ModelError("TransformedInputModel: empty acceptance interval");
        latent_boxes_[i] = {zlo, zhi};
        if (std::isfinite(zlo) || std::isfinite(zhi)) bounded_coords_.push_back(i);
    }

    // Dependence components of the latent covariance graph.
    const auto& S = latent_.covariance_matrix();
    std::vector<int> parent(d);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (S(i, j) != 0.0) parent[find(i)] = find(j);
    component_of_.resize(d);
    std::vector<int> label(d, -1);
    for (int i = 0; i < d; ++i) {
        int r = find(i);
        if (label[r] < 0) {
            label[r] = static_cast<int>(components_.size());
            components_.emplace_back();
        }
        component_of_[i] = label[r];
        components_[label[r]].push_back(i);
    }
    std::vector<int> bounded_in_component(components_.size(), 0);
    for (int i : bounded_coords_) bounded_in_component[component_of_[i]]++;
    for (int c : bounded_in_component)
        if (c > 1)
            throw ModelError(
                "TransformedInputModel: truncation bounds on dependent coordinates are not "
                "supported (acceptance mass would not factorize)");

    // Exact acceptance mass: bounded coordinates live in mutually independent
    // components, so the mass is a product of 1-d interval probabilities.
    acceptance_ = 1.0;
    for (int i : bounded_coords_) {
        const double mu = latent_.mean_vector()[i];
        const double sd = std::sqrt(S(i, i));
        acceptance_ *= normal_interval_probability(mu, sd, latent_boxes_[i].lo, latent_boxes_[i].hi);
    }
    if (!(acceptance_ > 0.0))
        throw ModelError("TransformedInputModel: acceptance mass is zero");
    log_acceptance_ = std::log(acceptance_);

    if (truncated()) {
        run_probe(probe_seed, probe_n);
    } else {
        acceptance_mc_ = 1.0;
        acceptance_se_ = 0.0;
        exact_moments();
    }
}

bool TransformedInputModel::domain_contains(const Eigen::VectorXd& x) const {
    for (int i = 0; i < dim(); ++i) {
        if (!maps_[i].in_range(x[i])) return false;
        if (x[i] < bounds_[i].lo || x[i] > bounds_[i].hi) return false;
    }
    return true;
}

Eigen::VectorXd TransformedInputModel::to_physical(const Eigen::VectorXd& z) const {
    Eigen::VectorXd x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = maps_[i].forward(z[i]);
    return x;
}

Eigen::VectorXd TransformedInputModel::to_latent(const Eigen::VectorXd& x) const {
    Eigen::VectorXd z(dim());
    for (int i = 0; i < dim(); ++i) {
        if (!maps_[i].in_range(x[i]))
            throw ArgumentError("TransformedInputModel: point outside map range");
        z[i] = maps_[i].inverse(x[i]);
    }
    return z;
}

double TransformedInputModel::log_density(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw ArgumentError("TransformedInputModel: dimension mismatch");
    double log_jac = 0.0;
    Eigen::VectorXd z(dim());
    for (int i = 0; i < dim(); ++i) {
        if (!maps_[i].in_range(x[i]) || x[i] < bounds_[i].lo || x[i] > bounds_[i].hi)
            return -kInf;
        z[i] = maps_[i].inverse(x[i]);
        log_jac += maps_[i].log_jacobian(x[i]);
    }
    return latent_.log_density(z) + log_jac - log_acceptance_;
}

double TransformedInputModel::log_conditional_box_mass(int coord, const Subset& v,
                                                       const Eigen::VectorXd& z_v) const {
    // P(z_coord in box | z_v). Only coordinates of coord's own dependence
    // component matter; everything else is independent of z_coord.
    const auto& S = latent_.covariance_matrix();
    const auto& mu = latent_.mean_vector();
    std::vector<int> observed;
    std::vector<double> z_obs;
    const auto& vm = v.members();
    for (size_t k = 0; k < vm.size(); ++k) {
        if (component_of_[vm[k]] == component_of_[coord]) {
            observed.push_back(vm[k]);
            z_obs.push_back(z_v[static_cast<int>(k)]);
        }
    }
    double m = mu[coord];
    double var = S(coord, coord);
    if (!observed.empty()) {
        const int c = static_cast<int>(observed.size());
        Eigen::MatrixXd Soo(c, c);
        Eigen::VectorXd Sco(c), dz(c);
        for (int i = 0; i < c; ++i) {
            Sco[i] = S(coord, observed[i]);
            dz[i] = z_obs[i] - mu[observed[i]];
            for (int j = 0; j < c; ++j) Soo(i, j) = S(observed[i], observed[j]);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(Soo);
        if (llt.info() != Eigen::Success)
            throw ModelError("TransformedInputModel: singular conditioning block");
        Eigen::VectorXd w = llt.solve(Sco);
        m += w.dot(dz);
        var -= w.dot(Sco);
    }
    if (!(var > 0.0)) throw ModelError("TransformedInputModel: degenerate conditional variance");
    const double p = normal_interval_probability(m, std::sqrt(var), latent_boxes_[coord].lo,
                                                 latent_boxes_[coord].hi);
    return p > 0.0 ? std::log(p) : -kInf;
}

double TransformedInputModel::log_marginal_density(const Subset& v,
                                                   const Eigen::VectorXd& x_v) const {
    if (v.empty()) throw ArgumentError("TransformedInputModel: marginal over empty subset");
    if (v.dim() != dim()) throw ArgumentError("TransformedInputModel: subset dimension mismatch");
    const auto& vm = v.members();
    double log_jac = 0.0;
    Eigen::VectorXd z_v(v.size());
    for (int k = 0; k < v.size(); ++k) {
        const int i = vm[k];
        const double xi = x_v[k];
        if (!maps_[i].in_range(xi) || xi < bounds_[i].lo || xi > bounds_[i].hi) return -kInf;
        z_v[k] = maps_[i].inverse(xi);
        log_jac += maps_[i].log_jacobian(xi);
    }
    double out = (v.is_full() ? latent_.log_density(z_v)
                              : latent_.log_marginal_density(v, z_v)) +
                 log_jac - log_acceptance_;
    for (int j : bounded_coords_)
        if (!v.contains(j)) out += log_conditional_box_mass(j, v, z_v);
    return out;
}

Eigen::MatrixXd TransformedInputModel::sample(int n, Rng& rng) const {
    if (n < 1) throw ArgumentError("TransformedInputModel::sample: n must be >= 1");
    Eigen::MatrixXd out(n, dim());
    long long proposals = 0;
    const long long cap = std::max<long long>(1000000, 20000LL * n);
    int got = 0;
    while (got < n) {
        Eigen::VectorXd z = latent_.sample(1, rng).row(0);
        ++proposals;
        bool ok = true;
        for (int i = 0; i < dim() && ok; ++i)
            ok = z[i] >= latent_boxes_[i].lo && z[i] <= latent_boxes_[i].hi;
        if (ok) {
            out.row(got++) = to_physical(z).transpose();
        } else if (proposals > cap && static_cast<double>(got) / proposals < 1e-4) {
            throw ConfigError("TransformedInputModel::sample: acceptance rate below 1e-4");
        }
    }
    return out;
}

Eigen::MatrixXd TransformedInputModel::sample_conditional(const Subset& free,
                                                          const Eigen::VectorXd& x_fixed,
                                                          int n, Rng& rng) const {
    const Subset fixed = free.complement();
    if (x_fixed.size() != fixed.size())
        throw ArgumentError("TransformedInputModel::sample_conditional: bad conditioning length");
    Eigen::VectorXd z_fixed(fixed.size());
    const auto& fm = fixed.members();
    for (int k = 0; k < fixed.size(); ++k) {
        if (!maps_[fm[k]].in_range(x_fixed[k]))
            throw ArgumentError("TransformedInputModel: conditioning point outside map range");
        z_fixed[k] = maps_[fm[k]].inverse(x_fixed[k]);
    }
    GaussianConditional gen(latent_, free);
    Eigen::MatrixXd out(n, free.size());
    const auto& fmem = free.members();
    long long proposals = 0;
    const long long cap = std::max<long long>(1000000, 20000LL * n);
    int got = 0;
    while (got < n) {
        Eigen::VectorXd z = gen.sample(z_fixed, 1, rng).row(0);
        ++proposals;
        bool ok = true;
        for (int k = 0; k < free.size() && ok; ++k)
            ok = z[k] >= latent_boxes_[fmem[k]].lo && z[k] <= latent_boxes_[fmem[k]].hi;
        if (ok) {
            for (int k = 0; k < free.size(); ++k) out(got, k) = maps_[fmem[k]].forward(z[k]);
            ++got;
        } else if (proposals > cap && static_cast<double>(got) / proposals < 1e-4) {
            throw ConfigError(
                "TransformedInputModel::sample_conditional: acceptance rate below 1e-4");
        }
    }
    return out;
}

InputModel::LogDensityFn TransformedInputModel::marginal_log_density_fn(const Subset& v) const {
    // Precompute the latent marginal and, for every bounded coordinate
    // outside v, the 1-d conditional regression onto the observed members of
    // its dependence component.
    struct BoundedTerm {
        int coord;
        std::vector<int> obs_pos; // positions inside x_v
        Eigen::VectorXd w;        // regression weights
        Eigen::VectorXd mu_obs;
        double mu, sd, lo, hi;
    };
    struct Prepared {
        const TransformedInputModel* self;
        Subset v;
        bool full;
        std::shared_ptr<GaussianModel> latent_marginal;
        std::vector<BoundedTerm> terms;
        double log_acc;
    };
    auto prep = std::make_shared<Prepared>();
    prep->self = this;
    prep->v = v;
    prep->full = v.is_full();
    prep->log_acc = log_acceptance_;
    if (!prep->full) prep->latent_marginal = std::make_shared<GaussianModel>(latent_.marginal(v));
    const auto& S = latent_.covariance_matrix();
    const auto& mu = latent_.mean_vector();
    const auto& vm = v.members();
    for (int j : bounded_coords_) {
        if (v.contains(j)) continue;
        BoundedTerm term;
        term.coord = j;
        std::vector<int> observed;
        for (size_t k = 0; k < vm.size(); ++k) {
            if (component_of_[vm[k]] == component_of_[j]) {
                observed.push_back(vm[k]);
                term.obs_pos.push_back(static_cast<int>(k));
            }
        }
        term.mu = mu[j];
        term.lo = latent_boxes_[j].lo;
        term.hi = latent_boxes_[j].hi;
        double var = S(j, j);
        if (!observed.empty()) {
            const int c = static_cast<int>(observed.size());
            Eigen::MatrixXd soo(c, c);
            Eigen::VectorXd sco(c);
            term.mu_obs.resize(c);
            for (int a = 0; a < c; ++a) {
                sco[a] = S(j, observed[a]);
                term.mu_obs[a] = mu[observed[a]];
                for (int b = 0; b < c; ++b) soo(a, b) = S(observed[a], observed[b]);
            }
            Eigen::LLT<Eigen::MatrixXd> llt(soo);
            if (llt.info() != Eigen::Success)
                throw ModelError("TransformedInputModel: singular conditioning block");
            term.w = llt.solve(sco);
            var -= term.w.dot(sco);
        }
        if (!(var > 0.0))
            throw ModelError("TransformedInputModel: degenerate conditional variance");
        term.sd = std::sqrt(var);
        prep->terms.push_back(std::move(term));
    }
    return [prep](const Eigen::VectorXd& x_v) {
        const TransformedInputModel& m = *prep->self;
        const auto& vm = prep->v.members();
        double log_jac = 0.0;
        Eigen::VectorXd z_v(prep->v.size());
        for (int k = 0; k < prep->v.size(); ++k) {
            const int i = vm[k];
            const double xi = x_v[k];
            if (!m.maps_[i].in_range(xi) || xi < m.bounds_[i].lo || xi > m.bounds_[i].hi)
                return -kInf;
            z_v[k] = m.maps_[i].inverse(xi);
            log_jac += m.maps_[i].log_jacobian(xi);
        }
        double out = (prep->full ? m.latent_.log_density(z_v)
                                 : prep->latent_marginal->log_density(z_v)) +
                     log_jac - prep->log_acc;
        for (const auto& term : prep->terms) {
            double mean = term.mu;
            for (size_t a = 0; a < term.obs_pos.size(); ++a)
                mean += term.w[a] * (z_v[term.obs_pos[a]] - term.mu_obs[a]);
            const double p = normal_interval_probability(mean, term.sd, term.lo, term.hi);
            if (!(p > 0.0)) return -kInf;
            out += std::log(p);
        }
        return out;
    };
}

InputModel::ConditionalSamplerFn TransformedInputModel::conditional_sampler_fn(
    const Subset& free) const {
    const Subset fixed = free.complement();
    auto gen = std::make_shared<GaussianConditional>(latent_, free);
    const TransformedInputModel* self = this;
    return [self, gen, free, fixed](const Eigen::VectorXd& x_fixed, int n, Rng& rng) {
        if (x_fixed.size() != fixed.size())
            throw ArgumentError("TransformedInputModel: bad conditioning length");
        Eigen::VectorXd z_fixed(fixed.size());
        const auto& fm = fixed.members();
        for (int k = 0; k < fixed.size(); ++k) {
            if (!self->maps_[fm[k]].in_range(x_fixed[k]))
                throw ArgumentError("TransformedInputModel: conditioning point outside range");
            z_fixed[k] = self->maps_[fm[k]].inverse(x_fixed[k]);
        }
        Eigen::MatrixXd out(n, free.size());
        const auto& fmem = free.members();
        long long proposals = 0;
        const long long cap = std::max<long long>(1000000, 20000LL * n);
        int got = 0;
        while (got < n) {
            Eigen::VectorXd z = gen->sample(z_fixed, 1, rng).row(0);
            ++proposals;
            bool ok = true;
            for (int k = 0; k < free.size() && ok; ++k)
                ok = z[k] >= self->latent_boxes_[fmem[k]].lo &&
                     z[k] <= self->latent_boxes_[fmem[k]].hi;
            if (ok) {
                for (int k = 0; k < free.size(); ++k) out(got, k) = self->maps_[fmem[k]].forward(z[k]);
                ++got;
            } else if (proposals > cap && static_cast<double>(got) / proposals < 1e-4) {
                throw ConfigError(
                    "TransformedInputModel::conditional_sampler_fn: acceptance below 1e-4");
            }
        }
        return out;
    };
}

void TransformedInputModel::run_probe(std::uint64_t probe_seed, int probe_n) {
    // One-off Monte Carlo probe: cross-checks the factorized acceptance mass
    // and estimates the physical moments of the truncated model.
    Rng rng = make_rng(probe_seed, 0);
    const int d = dim();
    long long accepted = 0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(d, d);
    for (int it = 0; it < probe_n; ++it) {
        Eigen::VectorXd z = latent_.sample(1, rng).row(0);
        bool ok = true;
        for (int i = 0; i < d && ok; ++i)
            ok = z[i] >= latent_boxes_[i].lo && z[i] <= latent_boxes_[i].hi;
        if (!ok) continue;
        ++accepted;
        Eigen::VectorXd x = to_physical(z);
        s1 += x;
        s2.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0);
    }
    if (accepted < 2) throw ModelError("TransformedInputModel: acceptance probe found no mass");
    acceptance_mc_ = static_cast<double>(accepted) / probe_n;
    acceptance_se_ = std::sqrt(acceptance_mc_ * (1.0 - acceptance_mc_) / probe_n);
    if (std::abs(acceptance_mc_ - acceptance_) > 6.0 * acceptance_se_ + 1e-9)
        throw ModelError("TransformedInputModel: acceptance probe disagrees with factorized mass");
    mean_ = s1 / static_cast<double>(accepted);
    Eigen::MatrixXd m2 = Eigen::MatrixXd(s2.selfadjointView<Eigen::Lower>()) /
                         static_cast<double>(accepted);
    cov_ = m2 - mean_ * mean_.transpose();
    cov_ = 0.5 * (cov_ + cov_.transpose());
}

void TransformedInputModel::exact_moments() {
    auto [m, c] = mapped_gaussian_moments(latent_, maps_);
    mean_ = std::move(m);
    cov_ = std::move(c);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> mapped_gaussian_moments(
    const GaussianModel& latent, const std::vector<CoordinateMap>& maps) {
    // With L_i = a_i z_i + b_i and E_i = a_i exp(z_i):
    //   Cov(E_i, E_j) = a_i a_j exp(mu_i+mu_j+(S_ii+S_jj)/2) (exp(S_ij)-1)
    //   Cov(E_i, L_j) = a_i a_j S_ij exp(mu_i+S_ii/2)
    const int d = latent.dim();
    const auto& mu = latent.mean_vector();
    const auto& S = latent.covariance_matrix();
    Eigen::VectorXd mean(d);
    std::vector<bool> is_exp(d);
    std::vector<double> scale(d), em(d);
    for (int i = 0; i < d; ++i) {
        const auto& m = maps[i];
        is_exp[i] = m.kind == CoordinateMap::Kind::Exp || m.kind == CoordinateMap::Kind::ScaledExp;
        scale[i] = (m.kind == CoordinateMap::Kind::Affine ||
                    m.kind == CoordinateMap::Kind::ScaledExp)
                       ? m.a
                       : 1.0;
        em[i] = std::exp(mu[i] + 0.5 * S(i, i));
        mean[i] = is_exp[i] ? scale[i] * em[i] : scale[i] * mu[i] + m.b;
    }
    Eigen::MatrixXd cov(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            double c;
            if (is_exp[i] && is_exp[j])
                c = scale[i] * scale[j] * em[i] * em[j] * std::expm1(S(i, j));
            else if (is_exp[i])
                c = scale[i] * scale[j] * S(i, j) * em[i];
            else if (is_exp[j])
                c = scale[i] * scale[j] * S(i, j) * em[j];
            else
                c = scale[i] * scale[j] * S(i, j);
            cov(i, j) = cov(j, i) = c;
        }
    }
    return {std::move(mean), std::move(cov)};
}

} // namespace tshap
