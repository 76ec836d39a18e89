#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "tshap/aggregation.hpp"
#include "tshap/conditional_indices.hpp"
#include "tshap/rare_event.hpp"

namespace tshap {

/// Estimator selector, CLI grammar "{dmc|pf}-{gm|gd}-{plain|is}".
struct MethodSpec {
    EstimatorScheme::Family family = EstimatorScheme::Family::Dmc;
    EstimatorScheme::Regime regime = EstimatorScheme::Regime::GivenData;
    bool importance = true;

    static MethodSpec parse(const std::string& text);
    std::string to_string() const;
};

/// Auxiliary-density selector: "none", "ce-sg", "ce-gm:K".
struct AuxSpec {
    enum class Kind { None, CeSingleGaussian, CeGaussianMixture };
    Kind kind = Kind::CeSingleGaussian;
    int components = 2;

    static AuxSpec parse(const std::string& text);
    std::string to_string() const;
};

/// Aggregation selector: "subset" or "perm:M".
struct AggregationSpec {
    enum class Kind { Subset, Permutation };
    Kind kind = Kind::Subset;
    long long permutations = 0;

    static AggregationSpec parse(const std::string& text);
    std::string to_string() const;
};

struct ExperimentConfig {
    std::string problem = "gaussian-linear";
    std::optional<GaussianLinearSpec> gl_override;
    MethodSpec method;
    AuxSpec aux;
    AggregationSpec aggregation;

    long long n_tot = 20000; // total phi budget of the estimation phase
    long long n_v = 10000;   // normalizer / p-hat sample size (given-model)
    int n_outer = 0;         // 0: derive from the budget formulas (given-model)
                             //    or use the given-data default of 1000
    int n_inner = 3;
    int n_data = 0;          // given-data sample size; 0 means n_tot
    int n_rep = 200;
    std::uint64_t seed = 0;
    bool preprocess = true;  // standardize the given-data search geometry
    bool reuse = false;      // given-model IS: inherit sample points (saves n_outer calls/subset)
    bool refit_aux_per_rep = false;
    VarianceScheme variance_scheme = VarianceScheme::Plugin;
    CrossEntropyConfig ce;
    std::string out_path;
};

struct PhiLedger {
    long long ce = 0;          // cross-entropy levels
    long long reliability = 0; // reliability-analysis sample (the N-sample)
    long long normalizer = 0;  // per-replication N_V draws, all replications
    long long estimation = 0;  // conditional-index estimators
    std::vector<long long> per_rep_estimation;

    long long total() const { return ce + reliability + normalizer + estimation; }
};

struct RunRecord {
    ExperimentConfig config;
    Eigen::MatrixXd effects;          // n_rep x d
    std::vector<double> p_hat;        // per replication (shared value repeated in given-data)
    std::vector<double> normalizer;   // Var(psi) estimate per replication
    int n_outer_used = 0;
    std::string variance_scheme_used;
    PhiLedger ledger;
    CrossEntropyDiagnostics ce_diag;
    InputModelPtr aux;                // fitted auxiliary density, when any
    double wall_time_s = 0.0;
};

/// End-to-end protocol: fit the auxiliary density if requested (keeping the
/// final sample), build the weighted sample, then estimate all conditional
/// indices per replication with fresh subsample seeds and aggregate.
RunRecord run(const ExperimentConfig& config);

/// Resolved outer-loop size from the budget rules. Throws ConfigError with
/// the violated formula when the budget is infeasible.
int resolve_n_outer(const ExperimentConfig& config, int d);

struct SummaryRow {
    double q1 = 0, median = 0, q3 = 0;
    double whisker_lo = 0, whisker_hi = 0;
    int fliers = 0;
};

/// Per-input quartiles and 1.5-IQR whiskers of the replication matrix.
std::vector<SummaryRow> summarize(const RunRecord& record);

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const RunRecord& record);
std::string summary_to_csv(const RunRecord& record);

void write_record(const RunRecord& record); // JSON to config.out_path, CSV beside it

} // namespace tshap
