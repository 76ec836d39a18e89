#include "tshap/rare_event.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "tshap/errors.hpp"
#include "tshap/mapped_model.hpp"
#include "tshap/mixture.hpp"

namespace tshap {

ProbabilityEstimate mc_failure_probability(const FailureProblem& problem, long long n, Rng& rng) {
    if (n < 1) throw ArgumentError("mc_failure_probability: n must be >= 1");
    long long hits = 0;
    const int chunk = 8192;
    long long done = 0;
    while (done < n) {
        const int m = static_cast<int>(std::min<long long>(chunk, n - done));
        Eigen::MatrixXd pts = problem.input->sample(m, rng);
        for (int i = 0; i < m; ++i)
            if (problem.failure(pts.row(i).transpose())) ++hits;
        done += m;
    }
    ProbabilityEstimate est;
    est.n = n;
    est.value = static_cast<double>(hits) / static_cast<double>(n);
    est.std_error = std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(n));
    est.rare_warning = hits == 0;
    return est;
}

WeightedFailureSample WeightedFailureSample::build(Eigen::MatrixXd points,
                                                   std::vector<std::uint8_t> indicators,
                                                   InputModelPtr f, InputModelPtr g) {
    WeightedFailureSample s;
    const int n = static_cast<int>(points.rows());
    if (static_cast<int>(indicators.size()) != n)
        throw ArgumentError("WeightedFailureSample: indicator length mismatch");
    s.points = std::move(points);
    s.indicators = std::move(indicators);
    s.f = std::move(f);
    s.g = std::move(g);
    s.weights = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        if (!s.indicators[i]) continue; // weight 0 wherever the indicator is 0
        const Eigen::VectorXd x = s.points.row(i).transpose();
        const double lf = s.f->log_density(x);
        if (std::isinf(lf)) {
            ++s.support_zeroed; // f = 0 where g sampled: 0/0 convention
            continue;
        }
        const double lg = s.g->log_density(x);
        if (std::isinf(lg))
            throw ModelError("WeightedFailureSample: g vanishes at one of its own draws");
        s.weights[i] = std::exp(lf - lg);
    }
    s.search_points = s.points;
    return s;
}

ProbabilityEstimate is_failure_probability(const WeightedFailureSample& sample) {
    const int n = sample.size();
    if (n < 1) throw ArgumentError("is_failure_probability: empty sample");
    ProbabilityEstimate est;
    est.n = n;
    est.value = sample.weights.mean();
    const double var = (sample.weights.array() - est.value).square().sum() / std::max(1, n - 1);
    est.std_error = std::sqrt(var / n);
    est.rare_warning = (sample.weights.array() == 0.0).all();
    return est;
}

double is_pt_squared_unbiased(const WeightedFailureSample& sample) {
    const int n = sample.size();
    if (n < 2) throw ArgumentError("is_pt_squared_unbiased: needs N >= 2");
    const double p = sample.weights.mean();
    const double m2 = sample.weights.array().square().mean();
    return p * p - (m2 - p * p) / (n - 1);
}

double variance_of_mean_unbiased(const Eigen::VectorXd& values) {
    const int n = static_cast<int>(values.size());
    if (n < 2) throw ArgumentError("variance_of_mean_unbiased: needs length >= 2");
    const double m = values.mean();
    const double m2 = values.array().square().mean();
    return (m2 - m * m) / (n - 1);
}

namespace {

struct WeightedGaussianFit {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Weighted mean/covariance with an eigenvalue floor of 1e-10 (flagged).
WeightedGaussianFit fit_weighted_gaussian(const Eigen::MatrixXd& pts, const Eigen::VectorXd& w,
                                          bool* floored) {
    const double wsum = w.sum();
    const int d = static_cast<int>(pts.cols());
    WeightedGaussianFit fit;
    fit.mean = (pts.transpose() * w) / wsum;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < pts.rows(); ++i) {
        if (w[i] == 0.0) continue;
        const Eigen::VectorXd dlt = pts.row(i).transpose() - fit.mean;
        cov.selfadjointView<Eigen::Lower>().rankUpdate(dlt, w[i]);
    }
    cov = Eigen::MatrixXd(cov.selfadjointView<Eigen::Lower>()) / wsum;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::VectorXd ev = es.eigenvalues();
    bool touched = false;
    for (int i = 0; i < d; ++i)
        if (ev[i] < 1e-10) {
            ev[i] = 1e-10;
            touched = true;
        }
    if (touched) {
        cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        if (floored) *floored = true;
    }
    fit.cov = 0.5 * (cov + cov.transpose());
    return fit;
}

InputModelPtr make_single(const WeightedGaussianFit& fit) {
    return std::make_shared<GaussianModel>(fit.mean, fit.cov);
}

// EM for a k-component mixture with per-point sample weights, warm-started
// from the previous level's parameters.
InputModelPtr fit_mixture(const Eigen::MatrixXd& pts, const Eigen::VectorXd& w,
                          const GaussianMixtureModel& previous, CrossEntropyDiagnostics& diag) {
    const int n = static_cast<int>(pts.rows());
    const int k0 = previous.component_count();
    std::vector<double> pi(previous.weights());
    std::vector<GaussianModel> comps(previous.components());
    Eigen::MatrixXd resp(n, k0);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 40; ++iter) {
        GaussianMixtureModel current(pi, comps);
        double ll = 0.0;
        for (int i = 0; i < n; ++i) {
            const Eigen::VectorXd x = pts.row(i).transpose();
            Eigen::VectorXd lp(k0);
            for (int c = 0; c < k0; ++c)
                lp[c] = (pi[c] > 0 ? std::log(pi[c]) : -1e300) + comps[c].log_density(x);
            const double mx = lp.maxCoeff();
            const double lse = mx + std::log((lp.array() - mx).exp().sum());
            ll += w[i] * lse;
            resp.row(i) = (lp.array() - lse).exp();
        }
        for (int c = 0; c < k0; ++c) {
            const Eigen::VectorXd wc = resp.col(c).cwiseProduct(w);
            const double wcs = wc.sum();
            if (wcs <= 1e-12 * w.sum()) {
                pi[c] = 0.0; // pruned below
                continue;
            }
            bool fl = false;
            WeightedGaussianFit fit = fit_weighted_gaussian(pts, wc, &fl);
            diag.covariance_floored = diag.covariance_floored || fl;
            comps[c] = GaussianModel(fit.mean, fit.cov);
            pi[c] = wcs / w.sum();
        }
        const double tot = std::accumulate(pi.begin(), pi.end(), 0.0);
        if (tot <= 0.0) throw CrossEntropyError("cross_entropy_fit: all mixture components pruned");
        for (double& p : pi) p /= tot;
        if (std::abs(ll - prev_ll) <= 1e-8 * (1.0 + std::abs(ll))) break;
        prev_ll = ll;
    }
    // Prune dead components.
    std::vector<double> pi2;
    std::vector<GaussianModel> comps2;
    for (int c = 0; c < k0; ++c) {
        if (pi[c] > 1e-8) {
            pi2.push_back(pi[c]);
            comps2.push_back(comps[c]);
        } else {
            ++diag.pruned_components;
        }
    }
    if (pi2.empty()) throw CrossEntropyError("cross_entropy_fit: all mixture components pruned");
    const double tot = std::accumulate(pi2.begin(), pi2.end(), 0.0);
    for (double& p : pi2) p /= tot;
    return std::make_shared<GaussianMixtureModel>(std::move(pi2), std::move(comps2));
}

InputModelPtr blend(const InputModelPtr& fresh, const InputModelPtr& old, double s,
                    CrossEntropyConfig::Family family) {
    if (s >= 1.0) return fresh;
    if (family == CrossEntropyConfig::Family::SingleGaussian) {
        const auto* gn = dynamic_cast<const GaussianModel*>(fresh.get());
        const auto* go = dynamic_cast<const GaussianModel*>(old.get());
        return std::make_shared<GaussianModel>(
            s * gn->mean_vector() + (1 - s) * go->mean_vector(),
            s * gn->covariance_matrix() + (1 - s) * go->covariance_matrix());
    }
    return fresh; // smoothing applies to the single-Gaussian family only
}

} // namespace

CrossEntropyResult cross_entropy_fit(const FailureProblem& problem, const CrossEntropyConfig& cfg,
                                     int final_sample_size, Rng& rng) {
    if (!(cfg.elite_quantile > 0.0 && cfg.elite_quantile < 1.0))
        throw ConfigError("cross_entropy_fit: elite quantile must be in (0,1)");
    if (cfg.samples_per_level < 10.0 / cfg.elite_quantile)
        throw ConfigError("cross_entropy_fit: samples_per_level must be >= 10/rho");
    if (!(cfg.smoothing > 0.0 && cfg.smoothing <= 1.0))
        throw ConfigError("cross_entropy_fit: smoothing must be in (0,1]");
    if (cfg.family == CrossEntropyConfig::Family::GaussianMixture && cfg.components < 1)
        throw ConfigError("cross_entropy_fit: mixture needs >= 1 component");

    CrossEntropyResult result;
    CrossEntropyDiagnostics& diag = result.diag;
    const auto& f = *problem.input;
    const int d = f.dim();
    const int n_level = cfg.samples_per_level;

    // Transformed input models are adapted in their latent Gaussian space:
    // the likelihood ratios stay Gaussian-vs-Gaussian there, while physical
    // lognormal tails would overwhelm a Gaussian fit. The returned handle is
    // mapped back to physical coordinates.
    const auto* tm = dynamic_cast<const TransformedInputModel*>(problem.input.get());
    std::function<double(const Eigen::VectorXd&)> log_f_work;
    std::function<double(const Eigen::VectorXd&)> phi_work;
    Eigen::VectorXd init_mean;
    Eigen::MatrixXd init_cov;
    if (tm) {
        const double log_acc = std::log(tm->acceptance());
        log_f_work = [tm, log_acc](const Eigen::VectorXd& z) {
            for (int i = 0; i < z.size(); ++i) {
                const auto& b = tm->bounds()[i];
                const double x = tm->maps()[i].forward(z[i]);
                if (x < b.lo || x > b.hi) return -std::numeric_limits<double>::infinity();
            }
            return tm->latent().log_density(z) - log_acc;
        };
        phi_work = [tm, &problem](const Eigen::VectorXd& z) {
            return problem.phi(tm->to_physical(z));
        };
        init_mean = tm->latent().mean_vector();
        init_cov = tm->latent().covariance_matrix();
    } else {
        log_f_work = [&f](const Eigen::VectorXd& x) { return f.log_density(x); };
        phi_work = [&problem](const Eigen::VectorXd& x) { return problem.phi(x); };
        init_mean = f.mean();
        init_cov = f.covariance();
    }

    // Start from the input-model moments.
    InputModelPtr g;
    {
        WeightedGaussianFit init{init_mean, init_cov};
        if (cfg.family == CrossEntropyConfig::Family::SingleGaussian) {
            g = make_single(init);
        } else {
            // Equal-weight copies with means spread along the leading axis.
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(init.cov);
            const Eigen::VectorXd dir =
                es.eigenvectors().col(d - 1) * std::sqrt(es.eigenvalues()[d - 1]);
            std::vector<double> w(cfg.components, 1.0 / cfg.components);
            std::vector<GaussianModel> comps;
            for (int c = 0; c < cfg.components; ++c) {
                const double off = cfg.components == 1
                                       ? 0.0
                                       : -1.0 + 2.0 * c / std::max(1, cfg.components - 1);
                comps.emplace_back(init.mean + off * dir, init.cov);
            }
            g = std::make_shared<GaussianMixtureModel>(std::move(w), std::move(comps));
        }
    }

    double level_threshold = -std::numeric_limits<double>::infinity();
    for (int level = 0; level < cfg.max_levels; ++level) {
        Eigen::MatrixXd pts = g->sample(n_level, rng);
        Eigen::VectorXd phi(n_level);
        for (int i = 0; i < n_level; ++i) phi[i] = phi_work(pts.row(i).transpose());
        diag.phi_calls += n_level;
        ++diag.levels;

        // (1 - rho) empirical quantile, capped at the target threshold.
        Eigen::VectorXd sorted = phi;
        std::sort(sorted.data(), sorted.data() + n_level);
        const int pos = static_cast<int>(
            std::floor((1.0 - cfg.elite_quantile) * (n_level - 1)));
        level_threshold = std::min(problem.threshold, sorted[pos]);
        diag.thresholds.push_back(level_threshold);

        // Intermediate levels keep phi >= level threshold; the final level
        // keeps strict exceedances of t, matching the failure indicator.
        const bool final_level = level_threshold >= problem.threshold;
        std::vector<int> elite;
        for (int i = 0; i < n_level; ++i) {
            const bool in = final_level ? phi[i] > problem.threshold : phi[i] >= level_threshold;
            if (in) elite.push_back(i);
        }
        if (elite.empty())
            throw CrossEntropyError("cross_entropy_fit: stagnation, no exceedances at level " +
                                    std::to_string(level + 1) + " (threshold " +
                                    std::to_string(level_threshold) + ")");

        Eigen::MatrixXd ep(elite.size(), d);
        Eigen::VectorXd ew(elite.size());
        for (size_t i = 0; i < elite.size(); ++i) {
            ep.row(i) = pts.row(elite[i]);
            const double lf = log_f_work(ep.row(i).transpose());
            const double lg = g->log_density(ep.row(i).transpose());
            ew[i] = std::isinf(lf) ? 0.0 : std::exp(lf - lg);
        }
        if (ew.sum() <= 0.0)
            throw CrossEntropyError(
                "cross_entropy_fit: stagnation, elite set carries no likelihood mass");

        InputModelPtr fresh;
        if (cfg.family == CrossEntropyConfig::Family::SingleGaussian) {
            bool fl = false;
            WeightedGaussianFit fit = fit_weighted_gaussian(ep, ew, &fl);
            diag.covariance_floored = diag.covariance_floored || fl;
            fresh = make_single(fit);
        } else {
            fresh = fit_mixture(ep, ew, dynamic_cast<const GaussianMixtureModel&>(*g), diag);
        }
        g = blend(fresh, g, cfg.smoothing, cfg.family);

        if (level_threshold >= problem.threshold) {
            diag.reached_target = true;
            break;
        }
    }

    InputModelPtr aux = tm ? std::make_shared<MappedModel>(g, tm->maps()) : g;
    result.aux = aux;
    if (!diag.reached_target) return result; // caller decides how to handle

    if (final_sample_size > 0) {
        Eigen::MatrixXd pts = aux->sample(final_sample_size, rng);
        std::vector<std::uint8_t> ind(final_sample_size);
        for (int i = 0; i < final_sample_size; ++i)
            ind[i] = problem.failure(pts.row(i).transpose()) ? 1 : 0;
        diag.phi_calls += final_sample_size;
        result.sample = WeightedFailureSample::build(std::move(pts), std::move(ind),
                                                     problem.input, aux);
    }
    return result;
}

} // namespace tshap
