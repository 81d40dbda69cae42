#pragma once

// JSON schema for mixtures:
//
//   { "family": "gaussian" | "gamma", "K": <int>, "d": <int>,
//     "weights": [w_1, ..., w_K],
//     "components": [ {"mean": [...d], "covariance": [...d*d row-major]}   // gaussian
//                   | {"shape": r, "scale": s} ] }                          // gamma
//
// Writers encode every double as a C99 hex-float string ("0x1.8p+0") so that
// a round trip is bit-exact. Readers accept hex strings or plain JSON numbers.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "byzmix/mixture.hpp"

namespace byzmix {

std::string encode_double(double x);
double decode_double(const nlohmann::json& j);

nlohmann::json to_json(const MixingDistribution& g);
MixingDistribution mixture_from_json(const nlohmann::json& j);

void write_mixture(const std::filesystem::path& path, const MixingDistribution& g);
MixingDistribution read_mixture(const std::filesystem::path& path);

}  // namespace byzmix
