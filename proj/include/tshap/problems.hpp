#pragma once

#include <functional>
#include <memory>
#include <string>

#include "tshap/input_model.hpp"

namespace tshap {

/// A reliability problem: limit-state function, failure threshold and input
/// model. Failure is the strict exceedance phi(x) > t; phi returns 0 outside
/// the physical domain so auxiliary densities with wider support can be used.
struct FailureProblem {
    std::string name;
    double threshold = 0.0;
    std::function<double(const Eigen::VectorXd&)> phi;
    InputModelPtr input;

    int dim() const { return input->dim(); }
    bool failure(const Eigen::VectorXd& x) const { return phi(x) > threshold; }
};

struct GaussianLinearSpec {
    Eigen::VectorXd beta;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    double t = 0.0;
};

/// phi(x) = beta^T x with Gaussian inputs. Throws ModelError when beta = 0 or
/// the covariance is not SPD.
FailureProblem gaussian_linear(const GaussianLinearSpec& spec);

/// The built-in 3-d correlated linear case: beta = (1,1,1), zero mean,
/// unit variances with a -0.3 cross term, threshold t = 4.
GaussianLinearSpec gaussian_linear_default_spec();

/// Tip displacement of a rectangular cantilever beam under two random forces,
/// 6 correlated inputs (3 LogNormal, 3 Normal), failure above 0.066 m.
FailureProblem cantilever_beam();

/// Raw displacement formula; 0 when any input is nonpositive.
double cantilever_displacement(const Eigen::VectorXd& x);

/// Rothermel-type rate of fire spread, 10 truncated inputs with one strongly
/// negative dependence pair, failure above 60 cm/s.
FailureProblem fire_spread();

/// Rate of spread in cm/s; 0 outside the physical domain.
double fire_spread_rate(const Eigen::VectorXd& x);

/// Map a LogNormal given by physical mean m and coefficient of variation c to
/// the parameters of the underlying normal: s^2 = log(1+c^2), mu = log m - s^2/2.
struct LogNormalParams {
    double mu;
    double sigma;
};
LogNormalParams lognormal_from_mean_cov(double mean, double cov);

/// Copy of a problem whose phi increments an external call counter. Used by
/// budget-accounting tests and the run ledger.
FailureProblem with_phi_counter(const FailureProblem& p, std::shared_ptr<long long> counter);

/// Lookup by CLI name: "gaussian-linear", "cantilever-beam", "fire-spread".
FailureProblem problem_by_name(const std::string& name);

} // namespace tshap
