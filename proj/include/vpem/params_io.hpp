#pragma once

#include <string>

#include "json.hpp"
#include "vpem/gmm.hpp"

namespace vpem {

// Mixture parameter document: k, d, layout ranges, pi, mu rows, sigma blocks
// row-major. Doubles survive the round trip bitwise.
nlohmann::ordered_json params_to_json(const GmmParams& theta);
GmmParams params_from_json(const nlohmann::json& j);

void save_params(const GmmParams& theta, const std::string& path);
GmmParams load_params(const std::string& path);

}  // namespace vpem
