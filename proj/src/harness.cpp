#include "tshap/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tshap/errors.hpp"
#include "tshap/mixture.hpp"
#include "tshap/model_config.hpp"

namespace tshap {

using nlohmann::json;

MethodSpec MethodSpec::parse(const std::string& text) {
    MethodSpec m;
    std::string s = text;
    auto take = [&](const std::string& prefix) {
        if (s.rfind(prefix, 0) == 0) {
            s = s.substr(prefix.size());
            return true;
        }
        return false;
    };
    if (take("dmc-")) m.family = EstimatorScheme::Family::Dmc;
    else if (take("pf-")) m.family = EstimatorScheme::Family::Pf;
    else throw ConfigError("method: expected dmc-... or pf-..., got '" + text + "'");
    if (take("gm-")) m.regime = EstimatorScheme::Regime::GivenModel;
    else if (take("gd-")) m.regime = EstimatorScheme::Regime::GivenData;
    else throw ConfigError("method: expected ...-gm-... or ...-gd-..., got '" + text + "'");
    if (s == "plain") m.importance = false;
    else if (s == "is") m.importance = true;
    else throw ConfigError("method: expected ...-plain or ...-is, got '" + text + "'");
    return m;
}

std::string MethodSpec::to_string() const {
    std::string s = family == EstimatorScheme::Family::Dmc ? "dmc-" : "pf-";
    s += regime == EstimatorScheme::Regime::GivenModel ? "gm-" : "gd-";
    s += importance ? "is" : "plain";
    return s;
}

AuxSpec AuxSpec::parse(const std::string& text) {
    AuxSpec a;
    if (text == "none") {
        a.kind = Kind::None;
    } else if (text == "ce-sg") {
        a.kind = Kind::CeSingleGaussian;
    } else if (text.rfind("ce-gm", 0) == 0) {
        a.kind = Kind::CeGaussianMixture;
        a.components = 2;
        if (text.size() > 5) {
            if (text[5] != ':') throw ConfigError("aux: expected ce-gm:K, got '" + text + "'");
            a.components = std::stoi(text.substr(6));
        }
    } else {
        throw ConfigError("aux: expected none|ce-sg|ce-gm:K, got '" + text + "'");
    }
    return a;
}

std::string AuxSpec::to_string() const {
    switch (kind) {
        case Kind::None: return "none";
        case Kind::CeSingleGaussian: return "ce-sg";
        case Kind::CeGaussianMixture: return "ce-gm:" + std::to_string(components);
    }
    return "none";
}

AggregationSpec AggregationSpec::parse(const std::string& text) {
    AggregationSpec a;
    if (text == "subset") {
        a.kind = Kind::Subset;
    } else if (text.rfind("perm", 0) == 0) {
        a.kind = Kind::Permutation;
        if (text.size() < 6 || text[4] != ':')
            throw ConfigError("aggregation: expected perm:M, got '" + text + "'");
        a.permutations = std::stoll(text.substr(5));
        if (a.permutations < 1) throw ConfigError("aggregation: perm count must be >= 1");
    } else {
        throw ConfigError("aggregation: expected subset|perm:M, got '" + text + "'");
    }
    return a;
}

std::string AggregationSpec::to_string() const {
    return kind == Kind::Subset ? "subset" : "perm:" + std::to_string(permutations);
}

int resolve_n_outer(const ExperimentConfig& cfg, int d) {
    if (cfg.n_outer > 0) return cfg.n_outer;
    if (cfg.method.regime == EstimatorScheme::Regime::GivenData) return 1000;
    const long long units = cfg.aggregation.kind == AggregationSpec::Kind::Subset
                                ? ((1LL << d) - 2)
                                : cfg.aggregation.permutations * (d - 1);
    const long long per_index =
        cfg.method.family == EstimatorScheme::Family::Dmc ? cfg.n_inner : 2;
    const long long n_o = (cfg.n_tot - cfg.n_v) / (per_index * units);
    if (n_o < 1) {
        std::ostringstream msg;
        msg << "budget infeasible: floor((n_tot - n_v) / ("
            << (cfg.method.family == EstimatorScheme::Family::Dmc ? "n_inner" : "2") << " * "
            << (cfg.aggregation.kind == AggregationSpec::Kind::Subset ? "(2^d - 2)"
                                                                      : "m*(d-1)")
            << ")) = " << n_o << " with n_tot=" << cfg.n_tot << ", n_v=" << cfg.n_v
            << ", d=" << d;
        throw ConfigError(msg.str());
    }
    return static_cast<int>(n_o);
}

namespace {

CrossEntropyConfig ce_config_for(const ExperimentConfig& cfg) {
    CrossEntropyConfig ce = cfg.ce;
    ce.family = cfg.aux.kind == AuxSpec::Kind::CeGaussianMixture
                    ? CrossEntropyConfig::Family::GaussianMixture
                    : CrossEntropyConfig::Family::SingleGaussian;
    ce.components = cfg.aux.components;
    return ce;
}

FailureProblem resolve_problem(const ExperimentConfig& cfg) {
    if (cfg.problem == "gaussian-linear" && cfg.gl_override)
        return gaussian_linear(*cfg.gl_override);
    return problem_by_name(cfg.problem);
}

/// Standardization choice for given-data runs: exact moments when the
/// sampling distribution is Gaussian or a mixture, empirical otherwise.
StandardizationMap choose_standardization(const InputModel& h, const Eigen::MatrixXd& points) {
    if (dynamic_cast<const GaussianModel*>(&h) || dynamic_cast<const GaussianMixtureModel*>(&h))
        return fit_standardization(h);
    return fit_standardization(points);
}

/// Lazily built KNN machinery per (subspace mask, k) over one fixed sample.
class KnnPool {
public:
    explicit KnnPool(const Eigen::MatrixXd& points) : points_(points) {}

    KnnContext context(const Subset& v, int k) {
        const std::uint64_t key = (static_cast<std::uint64_t>(v.mask()) << 8) |
                                  static_cast<std::uint64_t>(k & 0xff);
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            auto index = std::make_unique<KnnIndex>(points_, v);
            auto table = std::make_unique<NeighborTable>(*index, k);
            it = entries_.emplace(key, Entry{std::move(index), std::move(table)}).first;
        }
        return KnnContext{it->second.index.get(), it->second.table.get()};
    }

private:
    struct Entry {
        std::unique_ptr<KnnIndex> index;
        std::unique_ptr<NeighborTable> table;
    };
    const Eigen::MatrixXd& points_;
    std::map<std::uint64_t, Entry> entries_;
};

struct RepEstimates {
    Eigen::VectorXd effects;
    long long phi_calls = 0;
};

/// One replication: build the cost closure for the configured estimator and
/// aggregate it into d Shapley effects.
RepEstimates estimate_one_rep(const ExperimentConfig& cfg, const FailureProblem& problem,
                              const InputModelPtr& f, const InputModelPtr& g,
                              const WeightedFailureSample* wfs, KnnPool* pool, int n_outer,
                              double pt, double pt_sq, double normalizer, Rng& rng) {
    const int d = problem.dim();
    const bool is = cfg.method.importance;
    const bool dmc = cfg.method.family == EstimatorScheme::Family::Dmc;
    const bool given_data = cfg.method.regime == EstimatorScheme::Regime::GivenData;
    RepEstimates out;

    auto estimate_cost = [&](const Subset& u) -> double {
        ConditionalIndexEstimate e;
        if (given_data) {
            if (dmc) {
                const Subset v = u.complement();
                e = is ? t_ev_dmc_is_knn(*wfs, u, n_outer, cfg.n_inner, rng,
                                         pool->context(v, cfg.n_inner))
                       : t_ev_dmc_knn_plain(wfs->search_points, wfs->indicators, u, n_outer,
                                            cfg.n_inner, rng, pool->context(v, cfg.n_inner));
            } else {
                e = is ? t_ve_pf_is_knn(*wfs, u, n_outer, rng, pool->context(u, 2))
                       : t_ve_pf_knn_plain(wfs->search_points, wfs->indicators, u, n_outer,
                                           pt_sq, rng, pool->context(u, 2));
            }
        } else {
            const WeightedFailureSample* reuse = cfg.reuse ? wfs : nullptr;
            if (dmc) {
                e = is ? t_ev_dmc_is_given_model(problem, *f, *g, u, n_outer, cfg.n_inner, pt,
                                                 rng, reuse)
                       : t_ev_dmc_given_model(problem, *f, u, n_outer, cfg.n_inner, rng);
            } else {
                e = is ? t_ve_pf_is_given_model(problem, *f, *g, u, n_outer, pt_sq, rng, reuse)
                       : t_ve_pf_given_model(problem, *f, u, n_outer, pt_sq, rng);
            }
        }
        out.phi_calls += e.phi_calls;
        return e.value;
    };

    if (cfg.aggregation.kind == AggregationSpec::Kind::Subset) {
        out.effects = subset_aggregate(estimate_cost, d, normalizer);
    } else {
        // Interior prefix costs are estimated once per permutation; the walk
        // reuses the previous step's value for the shrinking end.
        std::uint32_t last_mask = 0;
        double last_cost = 0.0;
        const std::uint32_t full = (1u << d) - 1u;
        IncrementFn inc = [&](const Subset& prefix, int i) {
            const std::uint32_t pm = prefix.mask();
            double c_prev;
            if (pm == 0) c_prev = 0.0;
            else if (pm == last_mask) c_prev = last_cost;
            else c_prev = estimate_cost(prefix);
            const std::uint32_t nm = pm | (1u << i);
            const double c_next =
                nm == full ? normalizer : estimate_cost(Subset::from_mask(d, nm));
            last_mask = nm;
            last_cost = c_next;
            return c_next - c_prev;
        };
        out.effects =
            permutation_aggregate(inc, d, cfg.aggregation.permutations, normalizer, rng);
    }
    return out;
}

} // namespace

RunRecord run(const ExperimentConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    if (cfg.n_rep < 1) throw ConfigError("run: n_rep must be >= 1");
    if (cfg.method.family == EstimatorScheme::Family::Dmc && cfg.n_inner < 2)
        throw ConfigError("run: dmc methods need n_inner >= 2");
    if (cfg.method.importance && cfg.aux.kind == AuxSpec::Kind::None)
        throw ConfigError("run: importance-sampling methods need an auxiliary density (--aux)");
    if (cfg.reuse && (cfg.method.regime != EstimatorScheme::Regime::GivenModel ||
                      !cfg.method.importance))
        throw ConfigError("run: --reuse applies to given-model IS methods only");

    auto counter = std::make_shared<long long>(0);
    const FailureProblem base = resolve_problem(cfg);
    const FailureProblem problem = with_phi_counter(base, counter);
    const int d = problem.dim();
    const int n_outer = resolve_n_outer(cfg, d);
    const int n_data = cfg.n_data > 0 ? cfg.n_data : static_cast<int>(cfg.n_tot);
    const bool given_data = cfg.method.regime == EstimatorScheme::Regime::GivenData;

    RunRecord rec;
    rec.config = cfg;
    rec.n_outer_used = n_outer;
    rec.effects.resize(cfg.n_rep, d);
    rec.p_hat.resize(cfg.n_rep);
    rec.normalizer.resize(cfg.n_rep);

    const InputModelPtr f = problem.input;
    InputModelPtr g;
    WeightedFailureSample wfs;
    std::unique_ptr<KnnPool> pool;
    bool have_sample = false;

    auto fit_aux_and_sample = [&](Rng& rng, bool want_sample) {
        if (cfg.aux.kind == AuxSpec::Kind::None) {
            if (!want_sample) return;
            // Plain given-data substrate: an i.i.d. sample from f itself.
            Eigen::MatrixXd pts = f->sample(n_data, rng);
            std::vector<std::uint8_t> ind(n_data);
            for (int i = 0; i < n_data; ++i)
                ind[i] = problem.failure(pts.row(i).transpose()) ? 1 : 0;
            rec.ledger.reliability += n_data;
            wfs = WeightedFailureSample::build(std::move(pts), std::move(ind), f, f);
            have_sample = true;
            return;
        }
        const int final_n = want_sample ? n_data : 0;
        CrossEntropyResult ce = cross_entropy_fit(problem, ce_config_for(cfg), final_n, rng);
        if (!ce.diag.reached_target) {
            std::ostringstream msg;
            msg << "cross-entropy did not reach the target threshold after " << ce.diag.levels
                << " levels (last level threshold "
                << (ce.diag.thresholds.empty() ? 0.0 : ce.diag.thresholds.back()) << ")";
            throw CrossEntropyError(msg.str());
        }
        g = ce.aux;
        rec.aux = g;
        rec.ce_diag = ce.diag;
        rec.ledger.ce += ce.diag.phi_calls - final_n;
        rec.ledger.reliability += final_n;
        if (want_sample) {
            wfs = std::move(ce.sample);
            have_sample = true;
        }
    };

    auto prepare_sample = [&]() {
        if (!have_sample) return;
        if (given_data && cfg.preprocess) {
            const InputModel& h = cfg.method.importance ? *wfs.g : *f;
            const StandardizationMap map = choose_standardization(h, wfs.points);
            wfs.search_points = map.apply(wfs.points);
        }
        pool = std::make_unique<KnnPool>(wfs.search_points);
    };

    const bool want_sample = given_data || cfg.reuse;
    Rng rng_setup = make_rng(cfg.seed, 0);
    if (!cfg.refit_aux_per_rep) {
        fit_aux_and_sample(rng_setup, want_sample);
        prepare_sample();
    }

    for (int r = 0; r < cfg.n_rep; ++r) {
        Rng rng = make_rng(cfg.seed, 1 + static_cast<std::uint64_t>(r));
        if (cfg.refit_aux_per_rep) {
            have_sample = false;
            fit_aux_and_sample(rng, want_sample);
            prepare_sample();
        }

        double pt = 0.0, pt_sq = 0.0;
        NormalizerEstimate norm;
        const long long phi_before_norm = *counter;
        if (given_data || cfg.reuse) {
            // Everything comes from the shared sample: no extra phi calls.
            if (cfg.method.importance) {
                pt = is_failure_probability(wfs).value;
                pt_sq = is_pt_squared_unbiased(wfs);
            } else {
                double s = 0.0;
                for (auto v : wfs.indicators) s += v;
                pt = s / wfs.size();
                pt_sq = pt * pt;
            }
            norm = indicator_variance_plugin(pt);
            rec.variance_scheme_used = "plugin";
        } else if (cfg.method.importance) {
            // Fresh N_V reliability sample from g per replication.
            Eigen::MatrixXd pts = g->sample(static_cast<int>(cfg.n_v), rng);
            std::vector<std::uint8_t> ind(pts.rows());
            for (int i = 0; i < pts.rows(); ++i)
                ind[i] = problem.failure(pts.row(i).transpose()) ? 1 : 0;
            WeightedFailureSample vsample =
                WeightedFailureSample::build(std::move(pts), std::move(ind), f, g);
            pt = is_failure_probability(vsample).value;
            pt_sq = is_pt_squared_unbiased(vsample);
            norm = indicator_variance_plugin(pt);
            rec.variance_scheme_used = "plugin";
        } else {
            // Plain given-model: crude MC sample for p-hat and Var(psi).
            Eigen::MatrixXd pts = f->sample(static_cast<int>(cfg.n_v), rng);
            double s = 0.0;
            for (int i = 0; i < pts.rows(); ++i)
                s += problem.failure(pts.row(i).transpose()) ? 1.0 : 0.0;
            pt = s / static_cast<double>(pts.rows());
            pt_sq = pt * pt;
            if (cfg.variance_scheme == VarianceScheme::Mc) {
                norm.p_hat = pt;
                norm.value = static_cast<double>(cfg.n_v) / (cfg.n_v - 1) * pt * (1.0 - pt);
                rec.variance_scheme_used = "mc";
            } else {
                norm = indicator_variance_plugin(pt);
                rec.variance_scheme_used = "plugin";
            }
        }
        rec.ledger.normalizer += *counter - phi_before_norm;

        if (!(norm.value > 0.0))
            throw AggregationError("run: estimated Var(psi) is not positive (replication " +
                                   std::to_string(r + 1) + "); the failure event was never seen");

        const long long phi_before_est = *counter;
        RepEstimates rep = estimate_one_rep(cfg, problem, f, g, have_sample ? &wfs : nullptr,
                                            pool.get(), n_outer, pt, pt_sq, norm.value, rng);
        rec.ledger.per_rep_estimation.push_back(*counter - phi_before_est);
        rec.ledger.estimation += *counter - phi_before_est;
        rec.effects.row(r) = rep.effects.transpose();
        rec.p_hat[r] = pt;
        rec.normalizer[r] = norm.value;
    }

    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (!cfg.out_path.empty()) write_record(rec);
    return rec;
}

namespace {

SummaryRow summarize_column(Eigen::VectorXd col) {
    std::sort(col.data(), col.data() + col.size());
    const auto quantile = [&](double p) {
        const double h = p * (col.size() - 1);
        const int lo = static_cast<int>(std::floor(h));
        const int hi = std::min<int>(lo + 1, col.size() - 1);
        return col[lo] + (h - lo) * (col[hi] - col[lo]);
    };
    SummaryRow row;
    row.q1 = quantile(0.25);
    row.median = quantile(0.5);
    row.q3 = quantile(0.75);
    const double iqr = row.q3 - row.q1;
    const double lo_fence = row.q1 - 1.5 * iqr;
    const double hi_fence = row.q3 + 1.5 * iqr;
    row.whisker_lo = row.q3;
    row.whisker_hi = row.q1;
    for (int i = 0; i < col.size(); ++i) {
        if (col[i] >= lo_fence) {
            row.whisker_lo = col[i];
            break;
        }
    }
    for (int i = static_cast<int>(col.size()) - 1; i >= 0; --i) {
        if (col[i] <= hi_fence) {
            row.whisker_hi = col[i];
            break;
        }
    }
    for (int i = 0; i < col.size(); ++i)
        if (col[i] < row.whisker_lo || col[i] > row.whisker_hi) ++row.fliers;
    return row;
}

} // namespace

std::vector<SummaryRow> summarize(const RunRecord& record) {
    if (record.effects.rows() < 1) throw ArgumentError("summarize: empty record");
    std::vector<SummaryRow> rows;
    for (int j = 0; j < record.effects.cols(); ++j)
        rows.push_back(summarize_column(record.effects.col(j)));
    return rows;
}

json config_to_json(const ExperimentConfig& c) {
    json j{{"problem", c.problem},
           {"method", c.method.to_string()},
           {"aux", c.aux.to_string()},
           {"aggregation", c.aggregation.to_string()},
           {"n_tot", c.n_tot},
           {"n_v", c.n_v},
           {"n_outer", c.n_outer},
           {"n_inner", c.n_inner},
           {"n_data", c.n_data},
           {"n_rep", c.n_rep},
           {"seed", c.seed},
           {"preprocess", c.preprocess},
           {"reuse", c.reuse},
           {"refit_aux_per_rep", c.refit_aux_per_rep},
           {"variance_scheme", c.variance_scheme == VarianceScheme::Plugin ? "plugin" : "mc"},
           {"ce",
            {{"samples_per_level", c.ce.samples_per_level},
             {"elite_quantile", c.ce.elite_quantile},
             {"max_levels", c.ce.max_levels},
             {"smoothing", c.ce.smoothing}}}};
    if (c.gl_override) j["gaussian_linear"] = gaussian_linear_spec_to_json(*c.gl_override);
    if (!c.out_path.empty()) j["out"] = c.out_path;
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    c.problem = j.value("problem", c.problem);
    if (j.contains("method")) c.method = MethodSpec::parse(j["method"].get<std::string>());
    if (j.contains("aux")) c.aux = AuxSpec::parse(j["aux"].get<std::string>());
    if (j.contains("aggregation"))
        c.aggregation = AggregationSpec::parse(j["aggregation"].get<std::string>());
    c.n_tot = j.value("n_tot", c.n_tot);
    c.n_v = j.value("n_v", c.n_v);
    c.n_outer = j.value("n_outer", c.n_outer);
    c.n_inner = j.value("n_inner", c.n_inner);
    c.n_data = j.value("n_data", c.n_data);
    c.n_rep = j.value("n_rep", c.n_rep);
    c.seed = j.value("seed", c.seed);
    c.preprocess = j.value("preprocess", c.preprocess);
    c.reuse = j.value("reuse", c.reuse);
    c.refit_aux_per_rep = j.value("refit_aux_per_rep", c.refit_aux_per_rep);
    if (j.contains("variance_scheme"))
        c.variance_scheme = j["variance_scheme"] == "mc" ? VarianceScheme::Mc
                                                         : VarianceScheme::Plugin;
    if (j.contains("ce")) {
        const auto& ce = j["ce"];
        c.ce.samples_per_level = ce.value("samples_per_level", c.ce.samples_per_level);
        c.ce.elite_quantile = ce.value("elite_quantile", c.ce.elite_quantile);
        c.ce.max_levels = ce.value("max_levels", c.ce.max_levels);
        c.ce.smoothing = ce.value("smoothing", c.ce.smoothing);
    }
    if (j.contains("gaussian_linear"))
        c.gl_override = gaussian_linear_spec_from_json(j["gaussian_linear"]);
    c.out_path = j.value("out", c.out_path);
    return c;
}

json record_to_json(const RunRecord& r) {
    json effects = json::array();
    for (int i = 0; i < r.effects.rows(); ++i) {
        json row = json::array();
        for (int jx = 0; jx < r.effects.cols(); ++jx) row.push_back(r.effects(i, jx));
        effects.push_back(row);
    }
    json j{{"config", config_to_json(r.config)},
           {"effects", effects},
           {"p_hat", r.p_hat},
           {"normalizer", r.normalizer},
           {"n_outer_used", r.n_outer_used},
           {"variance_scheme_used", r.variance_scheme_used},
           {"ledger",
            {{"ce", r.ledger.ce},
             {"reliability", r.ledger.reliability},
             {"normalizer", r.ledger.normalizer},
             {"estimation", r.ledger.estimation},
             {"per_rep_estimation", r.ledger.per_rep_estimation},
             {"total", r.ledger.total()}}},
           {"ce_diag",
            {{"levels", r.ce_diag.levels},
             {"reached_target", r.ce_diag.reached_target},
             {"thresholds", r.ce_diag.thresholds},
             {"phi_calls", r.ce_diag.phi_calls},
             {"covariance_floored", r.ce_diag.covariance_floored},
             {"pruned_components", r.ce_diag.pruned_components}}},
           {"wall_time_s", r.wall_time_s}};
    if (r.aux) j["aux_density"] = model_to_json(*r.aux);
    return j;
}

std::string summary_to_csv(const RunRecord& record) {
    const std::vector<SummaryRow> rows = summarize(record);
    std::ostringstream out;
    out << "input,q1,median,q3,whisker_lo,whisker_hi,fliers\n";
    out.precision(12);
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& s = rows[i];
        out << (i + 1) << ',' << s.q1 << ',' << s.median << ',' << s.q3 << ',' << s.whisker_lo
            << ',' << s.whisker_hi << ',' << s.fliers << '\n';
    }
    return out.str();
}

void write_record(const RunRecord& record) {
    const std::string& path = record.config.out_path;
    if (path.empty()) throw ConfigError("write_record: no output path configured");
    std::ofstream js(path);
    if (!js) throw ConfigError("write_record: cannot open " + path);
    js << record_to_json(record).dump(2) << '\n';
    std::string csv_path = path;
    const auto dot = csv_path.rfind('.');
    csv_path = (dot == std::string::npos ? csv_path : csv_path.substr(0, dot)) + ".csv";
    std::ofstream cs(csv_path);
    if (!cs) throw ConfigError("write_record: cannot open " + csv_path);
    cs << summary_to_csv(record);
}

} // namespace tshap
