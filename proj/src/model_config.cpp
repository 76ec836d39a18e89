#include "tshap/model_config.hpp"

#include "tshap/errors.hpp"
#include "tshap/mapped_model.hpp"
#include "tshap/mixture.hpp"
#include "tshap/transformed.hpp"

namespace tshap {

using nlohmann::json;

namespace {

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
    return v;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const int rows = static_cast<int>(j.size());
    if (rows == 0) throw ConfigError("model config: empty matrix");
    const int cols = static_cast<int>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw ConfigError("model config: ragged matrix");
        for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json j = json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
        j.push_back(row);
    }
    return j;
}

GaussianModel gaussian_from_json(const json& j) {
    return GaussianModel(vector_from_json(j.at("mean")), matrix_from_json(j.at("covariance")));
}

json gaussian_to_json(const GaussianModel& g) {
    return {{"family", "gaussian"},
            {"mean", vector_to_json(g.mean_vector())},
            {"covariance", matrix_to_json(g.covariance_matrix())}};
}

CoordinateMap map_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "identity") return CoordinateMap::identity();
    if (type == "affine") return CoordinateMap::affine(j.at("a").get<double>(),
                                                       j.value("b", 0.0));
    if (type == "exp") return CoordinateMap::exponential();
    if (type == "scaled-exp") return CoordinateMap::scaled_exp(j.at("a").get<double>());
    throw ConfigError("model config: unknown transform type '" + type + "'");
}

} // namespace

InputModelPtr model_from_json(const json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "gaussian") return std::make_shared<GaussianModel>(gaussian_from_json(j));
    if (family == "gaussian-mixture") {
        std::vector<double> weights = j.at("weights").get<std::vector<double>>();
        std::vector<GaussianModel> comps;
        for (const auto& c : j.at("components")) comps.push_back(gaussian_from_json(c));
        return std::make_shared<GaussianMixtureModel>(std::move(weights), std::move(comps));
    }
    if (family == "transformed") {
        GaussianModel latent = gaussian_from_json(j.at("latent"));
        std::vector<CoordinateMap> maps;
        for (const auto& t : j.at("transforms")) maps.push_back(map_from_json(t));
        std::vector<CoordinateBounds> bounds;
        if (j.contains("bounds")) {
            for (const auto& b : j.at("bounds")) {
                CoordinateBounds cb;
                if (!b.is_null()) {
                    if (b.contains("lo")) cb.lo = b.at("lo").get<double>();
                    if (b.contains("hi")) cb.hi = b.at("hi").get<double>();
                }
                bounds.push_back(cb);
            }
        }
        return std::make_shared<TransformedInputModel>(std::move(latent), std::move(maps),
                                                       std::move(bounds));
    }
    throw ConfigError("model config: unknown family '" + family + "'");
}

json model_to_json(const InputModel& model) {
    if (const auto* g = dynamic_cast<const GaussianModel*>(&model)) return gaussian_to_json(*g);
    if (const auto* mix = dynamic_cast<const GaussianMixtureModel*>(&model)) {
        json comps = json::array();
        for (const auto& c : mix->components()) comps.push_back(gaussian_to_json(c));
        return {{"family", "gaussian-mixture"}, {"weights", mix->weights()},
                {"components", comps}};
    }
    if (const auto* t = dynamic_cast<const TransformedInputModel*>(&model)) {
        json maps = json::array();
        for (const auto& m : t->maps()) {
            switch (m.kind) {
                case CoordinateMap::Kind::Identity: maps.push_back({{"type", "identity"}}); break;
                case CoordinateMap::Kind::Affine:
                    maps.push_back({{"type", "affine"}, {"a", m.a}, {"b", m.b}});
                    break;
                case CoordinateMap::Kind::Exp: maps.push_back({{"type", "exp"}}); break;
                case CoordinateMap::Kind::ScaledExp:
                    maps.push_back({{"type", "scaled-exp"}, {"a", m.a}});
                    break;
            }
        }
        json bounds = json::array();
        for (const auto& b : t->bounds()) {
            json jb = json::object();
            if (std::isfinite(b.lo)) jb["lo"] = b.lo;
            if (std::isfinite(b.hi)) jb["hi"] = b.hi;
            bounds.push_back(jb.empty() ? json() : jb);
        }
        return {{"family", "transformed"},
                {"latent", gaussian_to_json(t->latent())},
                {"transforms", maps},
                {"bounds", bounds},
                {"acceptance", t->acceptance()},
                {"acceptance_mc_se", t->acceptance_mc_se()}};
    }
    if (const auto* mp = dynamic_cast<const MappedModel*>(&model)) {
        json maps = json::array();
        for (const auto& m : mp->maps()) {
            switch (m.kind) {
                case CoordinateMap::Kind::Identity: maps.push_back({{"type", "identity"}}); break;
                case CoordinateMap::Kind::Affine:
                    maps.push_back({{"type", "affine"}, {"a", m.a}, {"b", m.b}});
                    break;
                case CoordinateMap::Kind::Exp: maps.push_back({{"type", "exp"}}); break;
                case CoordinateMap::Kind::ScaledExp:
                    maps.push_back({{"type", "scaled-exp"}, {"a", m.a}});
                    break;
            }
        }
        return {{"family", "mapped"}, {"latent", model_to_json(mp->latent())},
                {"transforms", maps}};
    }
    throw ConfigError("model_to_json: unsupported model type");
}

GaussianLinearSpec gaussian_linear_spec_from_json(const json& j) {
    GaussianLinearSpec spec;
    spec.beta = vector_from_json(j.at("beta"));
    spec.mean = j.contains("mean") ? vector_from_json(j.at("mean"))
                                   : Eigen::VectorXd::Zero(spec.beta.size()).eval();
    spec.covariance = j.contains("covariance")
                          ? matrix_from_json(j.at("covariance"))
                          : Eigen::MatrixXd::Identity(spec.beta.size(), spec.beta.size()).eval();
    spec.t = j.at("t").get<double>();
    return spec;
}

json gaussian_linear_spec_to_json(const GaussianLinearSpec& spec) {
    return {{"beta", vector_to_json(spec.beta)},
            {"mean", vector_to_json(spec.mean)},
            {"covariance", matrix_to_json(spec.covariance)},
            {"t", spec.t}};
}

} // namespace tshap
