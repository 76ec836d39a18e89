#pragma once

#include "json.hpp" // vendored nlohmann/json

#include "tshap/input_model.hpp"
#include "tshap/problems.hpp"

namespace tshap {

/// Build an input model from a JSON spec. Family tags:
///   {"family":"gaussian","mean":[...],"covariance":[[...]]}
///   {"family":"gaussian-mixture","weights":[...],"components":[{gaussian},...]}
///   {"family":"transformed","latent":{gaussian},
///    "transforms":[{"type":"identity"|"affine"|"exp"|"scaled-exp","a":..,"b":..},...],
///    "bounds":[{"lo":..,"hi":..} | null, ...]}
InputModelPtr model_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const InputModel& model);

/// Gaussian-linear problem spec: {"beta":[...],"mean":[...],"covariance":[[...]],"t":..}
GaussianLinearSpec gaussian_linear_spec_from_json(const nlohmann::json& j);
nlohmann::json gaussian_linear_spec_to_json(const GaussianLinearSpec& spec);

} // namespace tshap
