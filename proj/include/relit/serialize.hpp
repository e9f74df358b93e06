#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "relit/decomposition.hpp"
#include "relit/inverse.hpp"
#include "relit/sh.hpp"
#include "relit/synthetic.hpp"

namespace relit {

/// {"sh": [[9], [9], [9]]}, channel-major.
nlohmann::json light_to_json(const ShLighting& light);
/// Throws InvalidInput unless the document holds exactly 3 x 9 finite numbers.
ShLighting light_from_json(const nlohmann::json& doc);
ShLighting load_light(const std::filesystem::path& path);
void save_light(const ShLighting& light, const std::filesystem::path& path);

/// Light from a relight request: either {"sh": ...} or
/// {"direction": [x, y, z], "intensity": k, "ambient": a}.
ShLighting light_from_request(const nlohmann::json& doc);

nlohmann::json config_to_json(const OptimizerConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
OptimizerConfig config_from_json(const nlohmann::json& doc);
OptimizerConfig load_config(const std::filesystem::path& path);

/// Relative OBJ paths resolve against `base_dir`.
SyntheticScene scene_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
SyntheticScene load_scene(const std::filesystem::path& path);

/// Extra fields merged into meta.json next to phong_s and specular_samples.
void save_decomposition(const DecompositionSet& set, const std::filesystem::path& dir,
                        const nlohmann::json& meta = nlohmann::json::object());
DecompositionSet load_decomposition(const std::filesystem::path& dir);

}  // namespace relit
