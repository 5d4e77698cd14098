#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "brickplan/camera.hpp"
#include "brickplan/catalog.hpp"
#include "brickplan/detector.hpp"
#include "brickplan/infer.hpp"
#include "brickplan/mangen.hpp"
#include "brickplan/world.hpp"

namespace brickplan {

// All documents carry "schema": 1. Translations serialize in grid units
// (multiples of 0.5); parsing rejects anything off the half-unit lattice.
// Masks serialize run-length encoded over bottom-up raster indices.

nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);

nlohmann::json camera_to_json(const CameraParams& cam);
CameraParams camera_from_json(const nlohmann::json& j);

// Component type keys name either a catalog brick or an entry in a submodule
// definition table ({"key": {"parts": [{"type", "pose"}, ...]}}).
Component component_from_key(const std::string& key, const Catalog& catalog,
                             const std::map<std::string, Component>& submodule_defs);
nlohmann::json submodule_defs_to_json(const std::map<std::string, Component>& defs);
std::map<std::string, Component> submodule_defs_from_json(const nlohmann::json& j);

nlohmann::json plan_to_json(const AssemblyPlan& plan,
                            const std::map<std::string, Component>& submodule_defs);
struct LoadedPlan {
    AssemblyPlan plan;
    std::map<std::string, Component> submodule_defs;
};
LoadedPlan plan_from_json(const nlohmann::json& j, const Catalog& catalog);

nlohmann::json world_to_json(const VoxelWorld& world,
                             const std::map<std::string, Component>& submodule_defs);
VoxelWorld world_from_json(const nlohmann::json& j, const Catalog& catalog);

nlohmann::json observation_to_json(const StepObservation& obs);
StepObservation observation_from_json(const nlohmann::json& j);

nlohmann::json gen_config_to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const nlohmann::json& j);  // missing fields keep defaults

nlohmann::json step_inference_to_json(const StepInferenceResult& result);

// Canonical text form (2-space indent, sorted keys via ordered emission,
// trailing newline) so identical documents are byte-identical on disk.
std::string dump_json(const nlohmann::json& j);
nlohmann::json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace brickplan
