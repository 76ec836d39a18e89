#include "tshap/conditional_indices.hpp"

#include <cmath>

#include "tshap/errors.hpp"

namespace tshap {

namespace {

void check_subset(const Subset& u, int d) {
    if (u.dim() != d) throw ArgumentError("conditional index: subset dimension mismatch");
    if (!u.proper())
        throw ArgumentError("conditional index: subset must be proper and nonempty");
}

/// Neighbour lookup honoring a prebuilt index/table when provided.
struct NeighborSource {
    const KnnIndex* index;
    NeighborTable* table;
    std::unique_ptr<KnnIndex> owned;

    NeighborSource(const Eigen::MatrixXd& pts, const Subset& v, const KnnContext& ctx) {
        if (ctx.index) {
            if (!(ctx.index->subspace() == v))
                throw ArgumentError("KnnContext: prebuilt index subspace mismatch");
            index = ctx.index;
        } else {
            owned = std::make_unique<KnnIndex>(pts, v);
            index = owned.get();
        }
        table = ctx.table;
    }

    std::vector<int> get(int l, int k) {
        if (table) {
            if (table->k() != k) throw ArgumentError("KnnContext: table k mismatch");
            return table->get(l);
        }
        return index->query(l, k);
    }
};

} // namespace

ConditionalIndexEstimate t_ev_dmc_given_model(const FailureProblem& problem,
                                              const InputModel& model, const Subset& u,
                                              int n_outer, int n_inner, Rng& rng) {
    check_subset(u, model.dim());
    if (n_outer < 1) throw ArgumentError("t_ev_dmc_given_model: n_outer must be >= 1");
    if (n_inner < 2) throw ArgumentError("t_ev_dmc_given_model: n_inner must be >= 2");
    const Subset comp = u.complement();
    ConditionalIndexEstimate est;
    est.subset = u;
    est.kind = IndexKind::TEV;
    est.scheme = {EstimatorScheme::Family::Dmc, EstimatorScheme::Regime::GivenModel, false};
    est.n_outer = n_outer;
    est.n_inner = n_inner;
    const auto draw_outer = model.marginal_sampler_fn(comp);
    const auto draw_inner = model.conditional_sampler_fn(u);
    double acc = 0.0, acc_mean = 0.0;
    for (int n = 0; n < n_outer; ++n) {
        const Eigen::VectorXd x_comp = draw_outer(1, rng).row(0).transpose();
        const Eigen::MatrixXd xu = draw_inner(x_comp, n_inner, rng);
        double s1 = 0.0;
        for (int k = 0; k < n_inner; ++k) {
            const Eigen::VectorXd x = u.assemble(xu.row(k).transpose(), x_comp);
            s1 += problem.failure(x) ? 1.0 : 0.0;
        }
        est.phi_calls += n_inner;
        const double mean = s1 / n_inner;
        // indicators are 0/1 so the inner sum of squares equals s1
        acc += (s1 - n_inner * mean * mean) / (n_inner - 1);
        acc_mean += mean;
    }
    est.value = acc / n_outer;
    est.first_term = est.value;
    est.cloud_mean = acc_mean / n_outer;
    return est;
}

ConditionalIndexEstimate t_ve_pf_given_model(const FailureProblem& problem,
                                             const InputModel& model, const Subset& u,
                                             int n_outer, double pt_sq_estimate, Rng& rng) {
    check_subset(u, model.dim());
    if (n_outer < 1) throw ArgumentError("t_ve_pf_given_model: n_outer must be >= 1");
    const Subset comp = u.complement();
    ConditionalIndexEstimate est;
    est.subset = u;
    est.kind = IndexKind::TVE;
    est.scheme = {EstimatorScheme::Family::Pf, EstimatorScheme::Regime::GivenModel, false};
    est.n_outer = n_outer;
    est.n_inner = 2;
    const auto draw_outer = model.marginal_sampler_fn(u);
    const auto draw_legs = model.conditional_sampler_fn(comp);
    double acc = 0.0, acc_mean = 0.0;
    for (int n = 0; n < n_outer; ++n) {
        const Eigen::VectorXd x_u = draw_outer(1, rng).row(0).transpose();
        const Eigen::MatrixXd legs = draw_legs(x_u, 2, rng);
        const double a = problem.failure(comp.assemble(legs.row(0).transpose(), x_u)) ? 1.0 : 0.0;
        const double b = problem.failure(comp.assemble(legs.row(1).transpose(), x_u)) ? 1.0 : 0.0;
        est.phi_calls += 2;
        acc += a * b;
        acc_mean += 0.5 * (a + b);
    }
    est.first_term = acc / n_outer;
    est.value = est.first_term - pt_sq_estimate;
    est.cloud_mean = acc_mean / n_outer;
    return est;
}

namespace {

/// Shared assembly of the IS double-MC outer term with the 0/0 convention:
/// returns the contribution of (wbar^2 - correction) * g_-u/f_-u and the
/// correction separately.
struct IsDmcTerm {
    double squared_mean_term = 0.0;
    double bias_term = 0.0;
    bool zeroed = false;
    bool support_error = false;
};

IsDmcTerm is_dmc_term(double wbar, double wsq_mean, int n_inner, double log_g_marg,
                      double log_f_marg) {
    IsDmcTerm t;
    if (std::isinf(log_f_marg)) {
        // f_-u vanished where g put mass: every weight of the inner cloud is
        // zero as well whenever the model pair is consistent, and the whole
        // term is set to 0 by the 0/0 convention.
        if (wbar == 0.0 && wsq_mean == 0.0) t.zeroed = true;
        else t.support_error = true;
        return t;
    }
    const double ratio = std::exp(log_g_marg - log_f_marg);
    t.squared_mean_term = wbar * wbar * ratio;
    t.bias_term = (wsq_mean - wbar * wbar) / (n_inner - 1) * ratio;
    return t;
}

} // namespace

ConditionalIndexEstimate t_ev_dmc_is_given_model(const FailureProblem& problem,
                                                 const InputModel& f, const InputModel& g,
                                                 const Subset& u, int n_outer, int n_inner,
                                                 double pt_is, Rng& rng,
                                                 const WeightedFailureSample* reuse) {
    check_subset(u, f.dim());
    if (n_outer < 1) throw ArgumentError("t_ev_dmc_is_given_model: n_outer must be >= 1");
    if (n_inner < 2)
        throw ArgumentError("t_ev_dmc_is_given_model: n_inner must be >= 2 (bias correction)");
    const Subset comp = u.complement();
    ConditionalIndexEstimate est;
    est.subset = u;
    est.kind = IndexKind::TEV;
    est.scheme = {EstimatorScheme::Family::Dmc, EstimatorScheme::Regime::GivenModel, true};
    est.n_outer = n_outer;
    est.n_inner = n_inner;
    const auto draw_outer = reuse ? InputModel::SamplerFn() : g.marginal_sampler_fn(comp);
    const auto draw_inner = g.conditional_sampler_fn(u);
    const auto log_g_comp = g.marginal_log_density_fn(comp);
    const auto log_f_comp = f.marginal_log_density_fn(comp);
    double acc = 0.0, acc_mean = 0.0, acc_bias = 0.0;
    for (int n = 0; n < n_outer; ++n) {
        Eigen::VectorXd x_comp;
        double w_first = 0.0;
        bool have_first = false;
        if (reuse) {
            const int l = uniform_index(reuse->size(), rng);
            x_comp = comp.gather(reuse->points.row(l).transpose());
            w_first = reuse->weights[l];
            have_first = true;
        } else {
            x_comp = draw_outer(1, rng).row(0).transpose();
        }
        const int fresh = n_inner - (have_first ? 1 : 0);
        const Eigen::MatrixXd xu = draw_inner(x_comp, fresh, rng);
        double s1 = have_first ? w_first : 0.0;
        double s2 = have_first ? w_first * w_first : 0.0;
        for (int k = 0; k < fresh; ++k) {
            const Eigen::VectorXd x = u.assemble(xu.row(k).transpose(), x_comp);
            double w = 0.0;
            if (problem.failure(x)) {
                const double lf = f.log_density(x);
                if (!std::isinf(lf)) w = std::exp(lf - g.log_density(x));
            }
            s1 += w;
            s2 += w * w;
        }
        est.phi_calls += fresh;
        const double wbar = s1 / n_inner;
        const double wsq = s2 / n_inner;
        const IsDmcTerm t =
            is_dmc_term(wbar, wsq, n_inner, log_g_comp(x_comp), log_f_comp(x_comp));
        if (t.zeroed) ++est.zeroed_terms;
        if (t.support_error) ++est.support_errors;
        acc += t.squared_mean_term - t.bias_term;
        acc_bias += t.bias_term;
        acc_mean += wbar;
    }
    est.first_term = acc / n_outer; // estimate of E[E(psi|X_-u)^2]
    est.value = pt_is - est.first_term;
    est.cloud_mean = acc_mean / n_outer;
    est.bias_estimate = acc_bias / n_outer;
    return est;
}

ConditionalIndexEstimate t_ve_pf_is_given_model(const FailureProblem& problem,
                                                const InputModel& f, const InputModel& g,
                                                const Subset& u, int n_outer,
                                                double pt_sq_unbiased, Rng& rng,
                                                const WeightedFailureSample* reuse) {
    check_subset(u, f.dim());
    if (n_outer < 1) throw ArgumentError("t_ve_pf_is_given_model: n_outer must be >= 1");
    const Subset comp = u.complement();
    ConditionalIndexEstimate est;
    est.subset = u;
    est.kind = IndexKind::TVE;
    est.scheme = {EstimatorScheme::Family::Pf, EstimatorScheme::Regime::GivenModel, true};
    est.n_outer = n_outer;
    est.n_inner = 2;
    const auto draw_outer = reuse ? InputModel::SamplerFn() : g.marginal_sampler_fn(u);
    const auto draw_legs = g.conditional_sampler_fn(comp);
    const auto log_g_u = g.marginal_log_density_fn(u);
    const auto log_f_u = f.marginal_log_density_fn(u);
    double acc = 0.0, acc_mean = 0.0;
    for (int n = 0; n < n_outer; ++n) {
        Eigen::VectorXd x_u;
        double w1 = 0.0;
        bool have_first = false;
        if (reuse) {
            const int l = uniform_index(reuse->size(), rng);
            x_u = u.gather(reuse->points.row(l).transpose());
            w1 = reuse->weights[l];
            have_first = true;
        } else {
            x_u = draw_outer(1, rng).row(0).transpose();
        }
        const int fresh = have_first ? 1 : 2;
        const Eigen::MatrixXd legs = draw_legs(x_u, fresh, rng);
        double w[2] = {w1, 0.0};
        for (int k = 0; k < fresh; ++k) {
            const Eigen::VectorXd x = comp.assemble(legs.row(k).transpose(), x_u);
            double wk = 0.0;
            if (problem.failure(x)) {
                const double lf = f.log_density(x);
                if (!std::isinf(lf)) wk = std::exp(lf - g.log_density(x));
            }
            w[have_first ? 1 : k] = wk;
        }
        est.phi_calls += fresh;
        const double prod = w[0] * w[1];
        const double log_fu_v = log_f_u(x_u);
        if (std::isinf(log_fu_v)) {
            if (prod == 0.0) ++est.zeroed_terms;
            else ++est.support_errors;
        } else {
            acc += prod * std::exp(log_g_u(x_u) - log_fu_v);
        }
        acc_mean += 0.5 * (w[0] + w[1]);
    }
    est.first_term = acc / n_outer;
    est.value = est.first_term - pt_sq_unbiased;
    est.cloud_mean = acc_mean / n_outer;
    return est;
}

ConditionalIndexEstimate t_ev_dmc_is_knn(const WeightedFailureSample& sample, const Subset& u,
                                         int n_outer, int n_inner, Rng& rng, KnnContext ctx) {
    check_subset(u, sample.dim());
    const int n = sample.size();
    if (n_outer < 1) throw ArgumentError("t_ev_dmc_is_knn: n_outer must be >= 1");
    if (n_inner < 2) throw ArgumentError("t_ev_dmc_is_knn: n_inner must be >= 2");
    if (n_inner > n) throw ArgumentError("t_ev_dmc_is_knn: n_inner exceeds the sample size");
    const Subset comp = u.complement();
    NeighborSource knn(sample.search_points, comp, ctx);
    ConditionalIndexEstimate est;
    est.subset = u;
    est.kind = IndexKind::TEV;
    est.scheme = {EstimatorScheme::Family::Dmc, EstimatorScheme::Regime::GivenData, true};
    est.n_outer = n_outer;
    est.n_inner = n_inner;
    const double pt_is = sample.weights.mean();
    const auto log_g_comp = sample.g->marginal_log_density_fn(comp);
    const auto log_f_comp = sample.f->marginal_log_density_fn(comp);
    double acc = 0.0, acc_mean = 0.0, acc_bias = 0.0;
    for (int it = 0; it < n_outer; ++it) {
        const int l = uniform_index(n, rng);
        const std::vector<int> neigh = knn.get(l, n_inner);
        double s1 = 0.0, s2 = 0.0;
        for (int idx : neigh) {
            const double w = sample.weights[idx];
            s1 += w;
            s2 += w * w;
        }
        const double wbar = s1 / n_inner;
        const double wsq = s2 / n_inner;
        const Eigen::VectorXd x_comp = comp.gather(sample.points.row(l).transpose());
        const IsDmcTerm t =
            is_dmc_term(wbar, wsq, n_inner, log_g_comp(x_comp), log_f_comp(x_comp));
        if (t.zeroed) ++est.zeroed_terms;
        if (t.support_error) ++est.support_errors;
        acc += t.squared_mean_term - t.bias_term;
        acc_bias += t.bias_term;
        acc_mean += wbar;
    }
    est.first_term = acc / n_outer;
    est.value = pt_is - est.first_term;
    est.cloud_mean = acc_mean / n_outer;
    est.bias_estimate = acc_bias / n_outer;
    return est;
}

ConditionalIndexEstimate t_ve_pf_is_knn(const WeightedFailureSample& sample, const Subset& u,
                                        int n_outer, Rng& rng, KnnContext ctx) {
    check_subset(u, sample.dim());
    const int n = sample.size();
    if (n < 2) throw ArgumentError("t_ve_pf_is_knn: needs a sample of size >= 2");
    if (n_outer < 1) throw ArgumentError("t_ve_pf_is_knn: n_outer must be >= 1");
    NeighborSource knn(sample.search_points, u, ctx);
    ConditionalIndexEstimate est;
    est.subset = u;
    est.kind = IndexKind::TVE;
    est.scheme = {EstimatorScheme::Family::Pf, EstimatorScheme::Regime::GivenData, true};
    est.n_outer = n_outer;
    est.n_inner = 2;
    const double pt_sq = is_pt_squared_unbiased(sample);
    const auto log_g_u = sample.g->marginal_log_density_fn(u);
    const auto log_f_u = sample.f->marginal_log_density_fn(u);
    double acc = 0.0, acc_mean = 0.0;
    for (int it = 0; it < n_outer; ++it) {
        const int l = uniform_index(n, rng);
        const std::vector<int> neigh = knn.get(l, 2);
        const double w1 = sample.weights[neigh[0]];
        const double w2 = sample.weights[neigh[1]];
        const double prod = w1 * w2;
        const Eigen::VectorXd x_u = u.gather(sample.points.row(l).transpose());
        const double log_fu_v = log_f_u(x_u);
        if (std::isinf(log_fu_v)) {
            if (prod == 0.0) ++est.zeroed_terms;
            else ++est.support_errors;
        } else {
            acc += prod * std::exp(log_g_u(x_u) - log_fu_v);
        }
        acc_mean += 0.5 * (w1 + w2);
    }
    est.first_term = acc / n_outer;
    est.value = est.first_term - pt_sq;
    est.cloud_mean = acc_mean / n_outer;
    return est;
}

ConditionalIndexEstimate t_ev_dmc_knn_plain(const Eigen::MatrixXd& search_points,
                                            const std::vector<std::uint8_t>& indicators,
                                            const Subset& u, int n_outer, int n_inner, Rng& rng,
                                            KnnContext ctx) {
    const int n = static_cast<int>(search_points.rows());
    check_subset(u, static_cast<int>(search_points.cols()));
    if (static_cast<int>(indicators.size()) != n)
        throw ArgumentError("t_ev_dmc_knn_plain: indicator length mismatch");
    if (n_outer < 1) throw ArgumentError("t_ev_dmc_knn_plain: n_outer must be >= 1");
    if (n_inner < 2 || n_inner > n)
        throw ArgumentError("t_ev_dmc_knn_plain: n_inner must be in [2, N]");
    const Subset comp = u.complement();
    NeighborSource knn(search_points, comp, ctx);
    ConditionalIndexEstimate est;
    est.subset = u;
    est.kind = IndexKind::TEV;
    est.scheme = {EstimatorScheme::Family::Dmc, EstimatorScheme::Regime::GivenData, false};
    est.n_outer = n_outer;
    est.n_inner = n_inner;
    double acc = 0.0, acc_mean = 0.0;
    for (int it = 0; it < n_outer; ++it) {
        const int l = uniform_index(n, rng);
        const std::vector<int> neigh = knn.get(l, n_inner);
        double s1 = 0.0;
        for (int idx : neigh) s1 += indicators[idx] ? 1.0 : 0.0;
        const double mean = s1 / n_inner;
        acc += (s1 - n_inner * mean * mean) / (n_inner - 1);
        acc_mean += mean;
    }
    est.value = acc / n_outer;
    est.first_term = est.value;
    est.cloud_mean = acc_mean / n_outer;
    return est;
}

ConditionalIndexEstimate t_ve_pf_knn_plain(const Eigen::MatrixXd& search_points,
                                           const std::vector<std::uint8_t>& indicators,
                                           const Subset& u, int n_outer, double pt_sq_estimate,
                                           Rng& rng, KnnContext ctx) {
    const int n = static_cast<int>(search_points.rows());
    check_subset(u, static_cast<int>(search_points.cols()));
    if (static_cast<int>(indicators.size()) != n)
        throw ArgumentError("t_ve_pf_knn_plain: indicator length mismatch");
    if (n < 2) throw ArgumentError("t_ve_pf_knn_plain: needs a sample of size >= 2");
    if (n_outer < 1) throw ArgumentError("t_ve_pf_knn_plain: n_outer must be >= 1");
    NeighborSource knn(search_points, u, ctx);
    ConditionalIndexEstimate est;
    est.subset = u;
    est.kind = IndexKind::TVE;
    est.scheme = {EstimatorScheme::Family::Pf, EstimatorScheme::Regime::GivenData, false};
    est.n_outer = n_outer;
    est.n_inner = 2;
    double acc = 0.0, acc_mean = 0.0;
    for (int it = 0; it < n_outer; ++it) {
        const int l = uniform_index(n, rng);
        const std::vector<int> neigh = knn.get(l, 2);
        const double a = indicators[neigh[0]] ? 1.0 : 0.0;
        const double b = indicators[neigh[1]] ? 1.0 : 0.0;
        acc += a * b;
        acc_mean += 0.5 * (a + b);
    }
    est.first_term = acc / n_outer;
    est.value = est.first_term - pt_sq_estimate;
    est.cloud_mean = acc_mean / n_outer;
    return est;
}

} // namespace tshap
