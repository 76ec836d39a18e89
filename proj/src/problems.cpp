#include "tshap/problems.hpp"

#include <cmath>

#include "tshap/errors.hpp"
#include "tshap/mixture.hpp"
#include "tshap/transformed.hpp"

namespace tshap {

namespace units {
// Imperial/metric conversion constants used by the fire-spread chain.
constexpr double cm_per_ft = 30.48;
constexpr double lb_per_kg = 2.2046226218487757;
constexpr double m2_per_ft2 = 0.09290304;
constexpr double lbft2_per_kgm2 = lb_per_kg * m2_per_ft2;      // 0.20481614...
constexpr double btu_per_lb_per_kcal_per_kg = 1.8;             // 1 kcal/kg = 1.8 Btu/lb
constexpr double lbft3_per_gcm3 = 62.42796120569815;
constexpr double ftmin_per_kmh = 100000.0 / cm_per_ft / 60.0;  // 54.6806649...
constexpr double cms_per_ftmin = cm_per_ft / 60.0;             // 0.508
} // namespace units

LogNormalParams lognormal_from_mean_cov(double mean, double cov) {
    if (!(mean > 0.0) || !(cov > 0.0))
        throw ArgumentError("lognormal_from_mean_cov: mean and cov must be positive");
    const double s2 = std::log1p(cov * cov);
    return {std::log(mean) - 0.5 * s2, std::sqrt(s2)};
}

GaussianLinearSpec gaussian_linear_default_spec() {
    GaussianLinearSpec spec;
    spec.beta = Eigen::Vector3d(1.0, 1.0, 1.0);
    spec.mean = Eigen::Vector3d::Zero();
    spec.covariance = Eigen::Matrix3d::Identity();
    spec.covariance(1, 2) = spec.covariance(2, 1) = -0.3;
    spec.t = 4.0;
    return spec;
}

FailureProblem gaussian_linear(const GaussianLinearSpec& spec) {
    if (spec.beta.size() == 0 || spec.beta.isZero(0.0))
        throw ModelError("gaussian_linear: beta must be nonzero");
    auto model = std::make_shared<GaussianModel>(spec.mean, spec.covariance);
    const Eigen::VectorXd beta = spec.beta;
    FailureProblem p;
    p.name = "gaussian-linear";
    p.threshold = spec.t;
    p.phi = [beta](const Eigen::VectorXd& x) { return beta.dot(x); };
    p.input = std::move(model);
    return p;
}

double cantilever_displacement(const Eigen::VectorXd& x) {
    if ((x.array() <= 0.0).any()) return 0.0; // outside the physical domain
    const double fx = x[0], fy = x[1], e = x[2], lx = x[3], ly = x[4], ll = x[5];
    const double bend = std::hypot(fx / (lx * lx), fy / (ly * ly));
    return 4.0 * ll * ll * ll / (e * lx * ly) * bend;
}

namespace {

InputModelPtr cantilever_input() {
    static const InputModelPtr model = [] {
        // F_X, F_Y, E: LogNormal from (mean, CoV); l_X, l_Y, L: Normal.
        const LogNormalParams pfx = lognormal_from_mean_cov(556.8, 0.08);
        const LogNormalParams pfy = lognormal_from_mean_cov(453.6, 0.08);
        const LogNormalParams pe = lognormal_from_mean_cov(200e9, 0.06);
        Eigen::VectorXd mu(6), sd(6);
        mu << pfx.mu, pfy.mu, pe.mu, 0.062, 0.0987, 4.29;
        sd << pfx.sigma, pfy.sigma, pe.sigma, 0.1 * 0.062, 0.1 * 0.0987, 0.1 * 4.29;
        Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(6, 6);
        corr(3, 4) = corr(4, 3) = -0.55;
        corr(3, 5) = corr(5, 3) = 0.45;
        corr(4, 5) = corr(5, 4) = 0.45;
        Eigen::MatrixXd cov = sd.asDiagonal() * corr * sd.asDiagonal();
        std::vector<CoordinateMap> maps = {
            CoordinateMap::exponential(), CoordinateMap::exponential(),
            CoordinateMap::exponential(), CoordinateMap::identity(),
            CoordinateMap::identity(),    CoordinateMap::identity()};
        return std::make_shared<TransformedInputModel>(GaussianModel(mu, cov), std::move(maps));
    }();
    return model;
}

InputModelPtr fire_input() {
    static const InputModelPtr model = [] {
        // delta, sigma, h, rho_p, m_l, m_d, S_T, U, tan(phi), P
        Eigen::VectorXd mu(10), sd(10);
        mu << 2.19, 3.31, 8.48, -0.592, 1.18, 0.19, 0.049, 1.0174, 0.38, -2.19;
        sd << 0.517, 0.294, 0.063, 0.219, 0.377, 0.047, 0.011, 0.5569, 0.186, 0.64;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(10, 10);
        cov.diagonal() = sd.array().square();
        // Gaussian copula between m_d and U, parameter -0.8.
        cov(5, 7) = cov(7, 5) = -0.8 * sd[5] * sd[7];
        std::vector<CoordinateMap> maps = {
            CoordinateMap::exponential(),   // delta, cm
            CoordinateMap::exponential(),   // sigma, 1/cm
            CoordinateMap::exponential(),   // h, kcal/kg
            CoordinateMap::exponential(),   // rho_p, g/cm^3
            CoordinateMap::identity(),      // m_l
            CoordinateMap::identity(),      // m_d
            CoordinateMap::identity(),      // S_T
            CoordinateMap::scaled_exp(6.9), // U, km/h
            CoordinateMap::identity(),      // tan(phi)
            CoordinateMap::exponential()};  // P
        // Rejection rules: nonnegative inputs, S_T <= 1, P <= 1, sigma >= 5/cm.
        std::vector<CoordinateBounds> bounds(10);
        bounds[1].lo = 5.0;
        bounds[4].lo = 0.0;
        bounds[5].lo = 0.0;
        bounds[6].lo = 0.0;
        bounds[6].hi = 1.0;
        bounds[8].lo = 0.0;
        bounds[9].hi = 1.0;
        return std::make_shared<TransformedInputModel>(GaussianModel(mu, cov), std::move(maps),
                                                       std::move(bounds));
    }();
    return model;
}

} // namespace

FailureProblem cantilever_beam() {
    FailureProblem p;
    p.name = "cantilever-beam";
    p.threshold = 0.066; // m
    p.phi = cantilever_displacement;
    p.input = cantilever_input();
    return p;
}

double fire_spread_rate(const Eigen::VectorXd& x) {
    const double delta = x[0], sigma_m = x[1], h_m = x[2], rho_pm = x[3], ml = x[4], md = x[5],
                 st = x[6], u_m = x[7], tan_phi = x[8], pp = x[9];
    // Physical domain: positive inputs, S_T and P at most 1, sigma >= 5/cm.
    if ((x.array() <= 0.0).any() || st > 1.0 || pp > 1.0 || sigma_m < 5.0) return 0.0;

    // Imperial units for the Rothermel chain.
    const double delta_ft = delta / units::cm_per_ft;
    const double sigma = sigma_m * units::cm_per_ft;                 // 1/ft
    const double h = h_m * units::btu_per_lb_per_kcal_per_kg;        // Btu/lb
    const double rho_p = rho_pm * units::lbft3_per_gcm3;             // lb/ft^3
    const double u = u_m * units::ftmin_per_kmh;                     // ft/min

    const double w0 = 4.8 / 4.8824 / (1.0 + std::exp((15.0 - delta) / 3.5)) *
                      units::lbft2_per_kgm2;                          // fuel loading, lb/ft^2
    const double sig15 = std::pow(sigma, 1.5);
    const double gamma_max = sig15 / (495.0 + 0.0594 * sig15);        // 1/min
    const double beta_op = 3.348 * std::pow(sigma, -0.8189);
    const double big_a = 133.0 * std::pow(sigma, -0.7913);
    const double theta_star = (301.4 - 305.87 * (ml - md) + 2260.0 * md) / (2260.0 * ml);
    const double theta = std::min(1.0, std::max(0.0, theta_star));
    const double mu_m = std::exp(-7.3 * pp * md - (7.3 * theta + 2.13) * (1.0 - pp) * ml);
    const double mu_s = 0.174 * std::pow(st, -0.19);
    const double cc = 7.47 * std::exp(-0.133 * std::pow(sigma, 0.55));
    const double bb = 0.02526 * std::pow(sigma, 0.54);
    const double ee = 0.715 * std::exp(-3.59e-4 * sigma);
    const double w_n = w0 * (1.0 - st);                               // net fuel loading
    const double rho_b = w0 / delta_ft;                               // bulk density, lb/ft^3
    const double eps = std::exp(-138.0 / sigma);                      // effective heating number
    const double q_ig = 130.87 + 1054.43 * md;                        // heat of preignition
    const double beta = rho_b / rho_p;                                // packing ratio
    const double gamma = gamma_max * std::pow(beta / beta_op, big_a) *
                         std::exp(big_a * (1.0 - beta / beta_op));
    const double xi = std::exp((0.792 + 0.681 * std::sqrt(sigma)) * (beta + 0.1)) /
                      (192.0 + 0.2595 * sigma);                       // propagating flux ratio
    const double phi_w = cc * std::pow(u, bb) * std::pow(beta / beta_op, -ee);
    const double phi_s = 5.275 * std::pow(beta, -0.3) * tan_phi * tan_phi;
    const double i_r = gamma * w_n * h * mu_m * mu_s;                 // reaction intensity
    const double r_ftmin = i_r * xi * (1.0 + phi_w + phi_s) / (rho_b * eps * q_ig);
    return r_ftmin * units::cms_per_ftmin;                            // cm/s
}

FailureProblem fire_spread() {
    FailureProblem p;
    p.name = "fire-spread";
    p.threshold = 60.0; // cm/s
    p.phi = fire_spread_rate;
    p.input = fire_input();
    return p;
}

FailureProblem with_phi_counter(const FailureProblem& p, std::shared_ptr<long long> counter) {
    FailureProblem out = p;
    auto inner = p.phi;
    out.phi = [inner, counter](const Eigen::VectorXd& x) {
        ++(*counter);
        return inner(x);
    };
    return out;
}

FailureProblem problem_by_name(const std::string& name) {
    if (name == "gaussian-linear") return gaussian_linear(gaussian_linear_default_spec());
    if (name == "cantilever-beam") return cantilever_beam();
    if (name == "fire-spread") return fire_spread();
    throw ConfigError("unknown problem name: " + name);
}

} // namespace tshap
