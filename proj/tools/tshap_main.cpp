// Command-line front end: run estimation experiments, print Gaussian-linear
// oracle values, or run a standalone reliability analysis.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "tshap/errors.hpp"
#include "tshap/harness.hpp"
#include "tshap/model_config.hpp"
#include "tshap/oracles.hpp"

namespace {

using tshap::ExperimentConfig;

tshap::GaussianLinearSpec load_gl_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tshap::ConfigError("cannot open spec file " + path);
    nlohmann::json j;
    in >> j;
    return tshap::gaussian_linear_spec_from_json(j);
}

int cmd_estimate(const ExperimentConfig& cfg, bool quiet) {
    tshap::RunRecord rec = tshap::run(cfg);
    if (!quiet) {
        const auto rows = tshap::summarize(rec);
        std::cout << "# " << cfg.problem << " " << cfg.method.to_string() << " aux="
                  << cfg.aux.to_string() << " agg=" << cfg.aggregation.to_string()
                  << " n_outer=" << rec.n_outer_used << "\n";
        std::cout << "input,q1,median,q3\n";
        for (size_t i = 0; i < rows.size(); ++i)
            std::cout << (i + 1) << ',' << rows[i].q1 << ',' << rows[i].median << ','
                      << rows[i].q3 << '\n';
        std::cout << "phi calls: ce=" << rec.ledger.ce << " reliability="
                  << rec.ledger.reliability << " normalizer=" << rec.ledger.normalizer
                  << " estimation=" << rec.ledger.estimation << " total="
                  << rec.ledger.total() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Target Shapley effect estimation for rare failure events"};
    app.require_subcommand(1);

    // --- estimate ---
    auto* est = app.add_subcommand("estimate", "Estimate target Shapley effects");
    std::string problem = "gaussian-linear", method = "dmc-gd-is", aux = "ce-sg",
                aggregation = "subset", out, config_path;
    long long n_tot = 20000, n_v = 10000;
    int n_outer = 0, n_inner = 3, n_data = 0, n_rep = 200;
    std::uint64_t seed = 0;
    std::string preprocess = "on";
    bool reuse = false, refit = false, quiet = false;
    est->add_option("--config", config_path, "JSON config file (flags override it)");
    est->add_option("--problem", problem, "gaussian-linear|cantilever-beam|fire-spread");
    est->add_option("--method", method, "{dmc|pf}-{gm|gd}-{plain|is}");
    est->add_option("--aux", aux, "none|ce-sg|ce-gm:K");
    est->add_option("--aggregation", aggregation, "subset|perm:M");
    est->add_option("--ntot", n_tot, "total phi budget for estimation");
    est->add_option("--nv", n_v, "normalizer sample size (given-model)");
    est->add_option("--no", n_outer, "outer loop size (0 = derive from budget)");
    est->add_option("--ni", n_inner, "inner loop size for double MC");
    est->add_option("--n", n_data, "given-data sample size (0 = ntot)");
    est->add_option("--nrep", n_rep, "replications");
    est->add_option("--seed", seed, "master seed");
    est->add_option("--preprocess", preprocess, "on|off: standardize given-data geometry");
    est->add_flag("--reuse", reuse, "reuse the reliability sample in given-model IS");
    est->add_flag("--refit-aux", refit, "refit the auxiliary density per replication");
    est->add_option("--out", out, "write JSON record (and CSV summary) here");
    est->add_flag("--quiet", quiet, "suppress stdout summary");

    // --- oracle ---
    auto* ora = app.add_subcommand("oracle", "Print Gaussian-linear oracle values");
    std::string spec_path;
    int gh_nodes = 128;
    ora->add_option("--spec", spec_path, "JSON file with beta/mean/covariance/t")->required();
    ora->add_option("--nodes", gh_nodes, "Gauss-Hermite node count");

    // --- reliability ---
    auto* rel = app.add_subcommand("reliability", "Failure probability estimation");
    std::string rproblem = "gaussian-linear", raux = "none";
    long long rn = 1000000;
    std::uint64_t rseed = 0;
    rel->add_option("--problem", rproblem, "problem name");
    rel->add_option("--aux", raux, "none (crude MC) | ce-sg | ce-gm:K (IS)");
    rel->add_option("--n", rn, "sample size");
    rel->add_option("--seed", rseed, "seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (est->parsed()) {
            ExperimentConfig cfg;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw tshap::ConfigError("cannot open config file " + config_path);
                nlohmann::json j;
                in >> j;
                cfg = tshap::config_from_json(j);
            }
            // CLI flags override file values when explicitly given; without a
            // config file every flag (or its default) applies.
            const bool bare = config_path.empty();
            auto set = [&](const char* flag, auto&& fn) {
                if (bare || est->count(flag)) fn();
            };
            set("--problem", [&] { cfg.problem = problem; });
            set("--method", [&] { cfg.method = tshap::MethodSpec::parse(method); });
            set("--aux", [&] { cfg.aux = tshap::AuxSpec::parse(aux); });
            set("--aggregation",
                [&] { cfg.aggregation = tshap::AggregationSpec::parse(aggregation); });
            set("--ntot", [&] { cfg.n_tot = n_tot; });
            set("--nv", [&] { cfg.n_v = n_v; });
            set("--no", [&] { cfg.n_outer = n_outer; });
            set("--ni", [&] { cfg.n_inner = n_inner; });
            set("--n", [&] { cfg.n_data = n_data; });
            set("--nrep", [&] { cfg.n_rep = n_rep; });
            set("--seed", [&] { cfg.seed = seed; });
            set("--preprocess", [&] { cfg.preprocess = preprocess != "off"; });
            if (reuse) cfg.reuse = true;
            if (refit) cfg.refit_aux_per_rep = true;
            if (!out.empty()) cfg.out_path = out;
            return cmd_estimate(cfg, quiet);
        }
        if (ora->parsed()) {
            const tshap::GaussianLinearSpec spec = load_gl_spec(spec_path);
            tshap::QuadratureConfig quad;
            quad.nodes = gh_nodes;
            const double pt = tshap::gl_failure_probability(spec);
            const Eigen::VectorXd sh = tshap::gl_target_shapley(spec, quad);
            nlohmann::json j{{"p_t", pt}, {"var_psi", pt * (1 - pt)}};
            nlohmann::json eff = nlohmann::json::array();
            for (int i = 0; i < sh.size(); ++i) eff.push_back(sh[i]);
            j["target_shapley"] = eff;
            nlohmann::json tve = nlohmann::json::object();
            for (const auto& u : tshap::proper_subsets(static_cast<int>(spec.beta.size())))
                tve[u.to_string()] = tshap::gl_target_closed_sobol(spec, u, quad);
            j["target_closed_sobol"] = tve;
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (rel->parsed()) {
            const tshap::FailureProblem prob = tshap::problem_by_name(rproblem);
            tshap::Rng rng = tshap::make_rng(rseed, 0);
            nlohmann::json j;
            if (raux == "none") {
                const auto est_p = tshap::mc_failure_probability(prob, rn, rng);
                j = {{"estimator", "crude-mc"}, {"p_t", est_p.value},
                     {"std_error", est_p.std_error}, {"n", est_p.n},
                     {"rare_warning", est_p.rare_warning}};
            } else {
                const tshap::AuxSpec a = tshap::AuxSpec::parse(raux);
                tshap::CrossEntropyConfig ce;
                ce.family = a.kind == tshap::AuxSpec::Kind::CeGaussianMixture
                                ? tshap::CrossEntropyConfig::Family::GaussianMixture
                                : tshap::CrossEntropyConfig::Family::SingleGaussian;
                ce.components = a.components;
                auto res = tshap::cross_entropy_fit(prob, ce, static_cast<int>(rn), rng);
                if (!res.diag.reached_target)
                    throw tshap::CrossEntropyError("cross-entropy did not reach the target");
                const auto est_p = tshap::is_failure_probability(res.sample);
                j = {{"estimator", "is"},
                     {"p_t", est_p.value},
                     {"std_error", est_p.std_error},
                     {"n", est_p.n},
                     {"rare_warning", est_p.rare_warning},
                     {"ce_levels", res.diag.levels},
                     {"ce_phi_calls", res.diag.phi_calls},
                     {"aux", tshap::model_to_json(*res.aux)}};
            }
            std::cout << j.dump(2) << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
