#pragma once

#include <filesystem>

#include <json.hpp>

#include "ldis/affine.hpp"
#include "ldis/fit.hpp"
#include "ldis/synth.hpp"

namespace ldis {

// {"coords": "normalized", "params": [a1..a6]}
void to_json(nlohmann::json& j, const AffineParams& p);
void from_json(const nlohmann::json& j, AffineParams& p);

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

void to_json(nlohmann::json& j, const FitConfig& c);
void from_json(const nlohmann::json& j, FitConfig& c);

void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

nlohmann::json read_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline; deterministic key order.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace ldis
