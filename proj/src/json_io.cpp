#include "brickplan/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "brickplan/error.hpp"

namespace brickplan {

namespace {

using nlohmann::json;

void require_schema(const json& j, const char* what) {
    if (!j.is_object()) throw ParseError(std::string(what) + ": expected a JSON object");
    if (!j.contains("schema") || !j["schema"].is_number_integer() || j["schema"].get<int>() != 1)
        throw ParseError(std::string(what) + ": unsupported or missing schema (want 1)");
}

int half_units_from(double units, const char* what) {
    const double doubled = 2.0 * units;
    const double rounded = std::round(doubled);
    if (std::abs(doubled - rounded) > 1e-6)
        throw ParseError(std::string(what) + ": value " + std::to_string(units) +
                         " is not a multiple of 0.5");
    return static_cast<int>(rounded);
}

json grid_vec_units(const GridVec& v) {
    return json::array({v.x * 0.5, v.y * 0.5, v.z * 0.5});
}

GridVec grid_vec_from_units(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + ": expected [x, y, z]");
    return {half_units_from(j[0].get<double>(), what), half_units_from(j[1].get<double>(), what),
            half_units_from(j[2].get<double>(), what)};
}

json dims_to_json(const GridVec& dims) { return json::array({dims.x, dims.y, dims.z}); }

GridVec dims_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + ": expected [x, y, z]");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

json step_to_json(const StepSpec& step) {
    json additions = json::array();
    for (const PlannedComponent& a : step.additions)
        additions.push_back({{"type", a.type_key}, {"pose", pose_to_json(a.pose)}});
    return {{"additions", std::move(additions)},
            {"relaxed_visibility", step.relaxed_visibility},
            {"image_index", step.image_index}};
}

StepSpec step_from_json(const json& j, const Catalog& catalog,
                        const std::map<std::string, Component>& defs,
                        const CameraParams& camera) {
    if (!j.is_object() || !j.contains("additions") || !j["additions"].is_array())
        throw ParseError("plan step: missing additions array");
    StepSpec step;
    step.camera = camera;
    step.relaxed_visibility = j.value("relaxed_visibility", false);
    step.image_index = j.value("image_index", -1);
    for (const json& a : j["additions"]) {
        if (!a.is_object() || !a.contains("type") || !a.contains("pose"))
            throw ParseError("plan step: addition needs type and pose");
        PlannedComponent pc;
        pc.type_key = a["type"].get<std::string>();
        pc.component = component_from_key(pc.type_key, catalog, defs);
        pc.pose = pose_from_json(a["pose"]);
        step.additions.push_back(std::move(pc));
    }
    return step;
}

}  // namespace

json pose_to_json(const Pose& pose) {
    return {{"t", grid_vec_units(pose.translation)}, {"r", pose.rotation.quarter_turns}};
}

Pose pose_from_json(const json& j) {
    if (!j.is_object() || !j.contains("t") || !j.contains("r"))
        throw ParseError("pose: expected {t: [x, y, z], r: 0..3}");
    Pose p;
    p.translation = grid_vec_from_units(j["t"], "pose.t");
    const int r = j["r"].get<int>();
    if (r < 0 || r > 3) throw ParseError("pose.r: quarter turns must be 0..3");
    p.rotation = Rotation{r};
    return p;
}

json camera_to_json(const CameraParams& cam) {
    return {{"schema", 1},
            {"scale", cam.scale},
            {"t", json::array({cam.t.x, cam.t.y})},
            {"euler_deg", json::array({cam.euler_deg[0], cam.euler_deg[1], cam.euler_deg[2]})},
            {"width", cam.width},
            {"height", cam.height}};
}

CameraParams camera_from_json(const json& j) {
    require_schema(j, "camera");
    CameraParams cam;
    cam.scale = j.at("scale").get<double>();
    if (cam.scale <= 0.0) throw ParseError("camera.scale: must be positive");
    const json& t = j.at("t");
    if (!t.is_array() || t.size() != 2) throw ParseError("camera.t: expected [x, y]");
    cam.t = {t[0].get<double>(), t[1].get<double>()};
    const json& e = j.at("euler_deg");
    if (!e.is_array() || e.size() != 3)
        throw ParseError("camera.euler_deg: expected [roll, yaw, pitch]");
    cam.euler_deg = {e[0].get<double>(), e[1].get<double>(), e[2].get<double>()};
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    if (cam.width <= 0 || cam.height <= 0) throw ParseError("camera: image size must be positive");
    return cam;
}

Component component_from_key(const std::string& key, const Catalog& catalog,
                             const std::map<std::string, Component>& defs) {
    if (catalog.contains(key)) return Component::brick(key);
    auto it = defs.find(key);
    if (it == defs.end()) throw ParseError("unknown component type key: " + key);
    return it->second;
}

json submodule_defs_to_json(const std::map<std::string, Component>& defs) {
    json out = json::object();
    for (const auto& [key, comp] : defs) {
        json parts = json::array();
        for (const ComponentPart& p : comp.parts)
            parts.push_back({{"type", p.type}, {"pose", pose_to_json(p.pose)}});
        out[key] = {{"parts", std::move(parts)}};
    }
    return out;
}

std::map<std::string, Component> submodule_defs_from_json(const json& j) {
    std::map<std::string, Component> defs;
    if (j.is_null()) return defs;
    if (!j.is_object()) throw ParseError("submodule_defs: expected an object");
    for (const auto& [key, def] : j.items()) {
        if (!def.is_object() || !def.contains("parts") || !def["parts"].is_array())
            throw ParseError("submodule_defs." + key + ": expected {parts: [...]}");
        std::vector<ComponentPart> parts;
        for (const json& p : def["parts"]) {
            if (!p.is_object() || !p.contains("type") || !p.contains("pose"))
                throw ParseError("submodule_defs." + key + ": part needs type and pose");
            parts.push_back({p["type"].get<std::string>(), pose_from_json(p["pose"])});
        }
        if (parts.empty()) throw ParseError("submodule_defs." + key + ": needs at least one part");
        defs.emplace(key, Component::submodule(std::move(parts)));
    }
    return defs;
}

json plan_to_json(const AssemblyPlan& plan, const std::map<std::string, Component>& submodule_defs) {
    json submodules = json::array();
    for (const SubmoduleDef& def : plan.submodules) {
        json steps = json::array();
        for (const StepSpec& s : def.steps) steps.push_back(step_to_json(s));
        submodules.push_back({{"key", def.key}, {"steps", std::move(steps)}});
    }
    json steps = json::array();
    for (const StepSpec& s : plan.steps) steps.push_back(step_to_json(s));
    return {{"schema", 1},
            {"world_dims", dims_to_json(plan.world_dims)},
            {"camera", camera_to_json(plan.camera)},
            {"submodule_defs", submodule_defs_to_json(submodule_defs)},
            {"submodules", std::move(submodules)},
            {"steps", std::move(steps)}};
}

LoadedPlan plan_from_json(const json& j, const Catalog& catalog) {
    require_schema(j, "plan");
    LoadedPlan out;
    out.plan.world_dims = dims_from_json(j.at("world_dims"), "plan.world_dims");
    out.plan.camera = camera_from_json(j.at("camera"));
    out.submodule_defs = submodule_defs_from_json(j.value("submodule_defs", json::object()));
    if (j.contains("submodules")) {
        for (const json& d : j.at("submodules")) {
            SubmoduleDef def;
            def.key = d.at("key").get<std::string>();
            auto it = out.submodule_defs.find(def.key);
            if (it == out.submodule_defs.end())
                throw ParseError("plan.submodules: key " + def.key + " has no definition");
            def.component = it->second;
            for (const json& s : d.at("steps"))
                def.steps.push_back(step_from_json(s, catalog, out.submodule_defs, out.plan.camera));
            out.plan.submodules.push_back(std::move(def));
        }
    }
    for (const json& s : j.at("steps"))
        out.plan.steps.push_back(step_from_json(s, catalog, out.submodule_defs, out.plan.camera));
    return out;
}

json world_to_json(const VoxelWorld& world, const std::map<std::string, Component>& submodule_defs) {
    json instances = json::array();
    for (const auto& [id, inst] : world.instances())
        instances.push_back({{"type", inst.label}, {"pose", pose_to_json(inst.pose)}});
    return {{"schema", 1},
            {"dims", dims_to_json(world.dims())},
            {"submodule_defs", submodule_defs_to_json(submodule_defs)},
            {"instances", std::move(instances)}};
}

VoxelWorld world_from_json(const json& j, const Catalog& catalog) {
    require_schema(j, "world");
    const GridVec dims = dims_from_json(j.at("dims"), "world.dims");
    const std::map<std::string, Component> defs =
        submodule_defs_from_json(j.value("submodule_defs", json::object()));
    VoxelWorld world(catalog, dims);
    for (const json& i : j.at("instances")) {
        const std::string key = i.at("type").get<std::string>();
        world.place(component_from_key(key, catalog, defs), pose_from_json(i.at("pose")), key);
    }
    return world;
}

json observation_to_json(const StepObservation& obs) {
    json detections = json::object();
    for (const auto& [key, dets] : obs.detections) {
        json arr = json::array();
        for (const Detection& d : dets) {
            json e = {{"keypoint", json::array({d.keypoint.x, d.keypoint.y})},
                      {"mask_rle", mask_to_rle(d.mask)}};
            e["rotation_class"] = d.rotation_class ? json(d.rotation_class->code) : json(nullptr);
            arr.push_back(std::move(e));
        }
        detections[key] = std::move(arr);
    }
    return {{"schema", 1},
            {"width", obs.width},
            {"height", obs.height},
            {"detections", std::move(detections)}};
}

StepObservation observation_from_json(const json& j) {
    require_schema(j, "observation");
    StepObservation obs;
    obs.width = j.at("width").get<int>();
    obs.height = j.at("height").get<int>();
    if (obs.width <= 0 || obs.height <= 0)
        throw ParseError("observation: image size must be positive");
    const json& detections = j.at("detections");
    if (!detections.is_object()) throw ParseError("observation.detections: expected an object");
    for (const auto& [key, arr] : detections.items()) {
        if (!arr.is_array()) throw ParseError("observation.detections." + key + ": expected a list");
        std::vector<Detection> dets;
        for (const json& e : arr) {
            Detection d;
            const json& kp = e.at("keypoint");
            if (!kp.is_array() || kp.size() != 2)
                throw ParseError("observation: keypoint must be [u, v]");
            d.keypoint = {kp[0].get<double>(), kp[1].get<double>()};
            d.mask = rle_to_mask(e.at("mask_rle").get<std::vector<std::int32_t>>());
            for (std::int32_t px : d.mask)
                if (px < 0 || px >= obs.width * obs.height)
                    throw ParseError("observation: mask pixel outside the image");
            const json& rc = e.at("rotation_class");
            if (!rc.is_null()) {
                const int code = rc.get<int>();
                if (code < 0 || code > 6)
                    throw ParseError("observation: rotation_class must be 0..6 or null");
                d.rotation_class = SymmetryClass7{code};
            }
            dets.push_back(std::move(d));
        }
        obs.detections.emplace(key, std::move(dets));
    }
    return obs;
}

json gen_config_to_json(const GenConfig& cfg) {
    return {{"schema", 1},
            {"seed", cfg.seed},
            {"world_dims", dims_to_json(cfg.world_dims)},
            {"min_length", cfg.min_length},
            {"max_length", cfg.max_length},
            {"min_width", cfg.min_width},
            {"max_width", cfg.max_width},
            {"min_height", cfg.min_height},
            {"max_height", cfg.max_height},
            {"w_single", cfg.w_single},
            {"w_submodule", cfg.w_submodule},
            {"w_tower", cfg.w_tower},
            {"edge_grow_prob", cfg.edge_grow_prob},
            {"submodule_reuse_prob", cfg.submodule_reuse_prob},
            {"max_submodule_parts", cfg.max_submodule_parts},
            {"submodule_depth", cfg.submodule_depth},
            {"attempt_budget", cfg.attempt_budget},
            {"max_chunk_instances", cfg.max_chunk_instances},
            {"max_chunk_types", cfg.max_chunk_types},
            {"visibility_threshold", cfg.visibility_threshold},
            {"min_scale", cfg.min_scale},
            {"max_scale", cfg.max_scale},
            {"base_roll", cfg.base_roll},
            {"roll_jitter", cfg.roll_jitter},
            {"base_yaw", cfg.base_yaw},
            {"yaw_jitter", cfg.yaw_jitter},
            {"base_pitch", cfg.base_pitch},
            {"pitch_jitter", cfg.pitch_jitter},
            {"image_width", cfg.image_width},
            {"image_height", cfg.image_height},
            {"frame_margin_px", cfg.frame_margin_px}};
}

GenConfig gen_config_from_json(const json& j) {
    require_schema(j, "gen config");
    GenConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("world_dims")) cfg.world_dims = dims_from_json(j["world_dims"], "world_dims");
    cfg.min_length = j.value("min_length", cfg.min_length);
    cfg.max_length = j.value("max_length", cfg.max_length);
    cfg.min_width = j.value("min_width", cfg.min_width);
    cfg.max_width = j.value("max_width", cfg.max_width);
    cfg.min_height = j.value("min_height", cfg.min_height);
    cfg.max_height = j.value("max_height", cfg.max_height);
    cfg.w_single = j.value("w_single", cfg.w_single);
    cfg.w_submodule = j.value("w_submodule", cfg.w_submodule);
    cfg.w_tower = j.value("w_tower", cfg.w_tower);
    cfg.edge_grow_prob = j.value("edge_grow_prob", cfg.edge_grow_prob);
    cfg.submodule_reuse_prob = j.value("submodule_reuse_prob", cfg.submodule_reuse_prob);
    cfg.max_submodule_parts = j.value("max_submodule_parts", cfg.max_submodule_parts);
    cfg.submodule_depth = j.value("submodule_depth", cfg.submodule_depth);
    cfg.attempt_budget = j.value("attempt_budget", cfg.attempt_budget);
    cfg.max_chunk_instances = j.value("max_chunk_instances", cfg.max_chunk_instances);
    cfg.max_chunk_types = j.value("max_chunk_types", cfg.max_chunk_types);
    cfg.visibility_threshold = j.value("visibility_threshold", cfg.visibility_threshold);
    cfg.min_scale = j.value("min_scale", cfg.min_scale);
    cfg.max_scale = j.value("max_scale", cfg.max_scale);
    cfg.base_roll = j.value("base_roll", cfg.base_roll);
    cfg.roll_jitter = j.value("roll_jitter", cfg.roll_jitter);
    cfg.base_yaw = j.value("base_yaw", cfg.base_yaw);
    cfg.yaw_jitter = j.value("yaw_jitter", cfg.yaw_jitter);
    cfg.base_pitch = j.value("base_pitch", cfg.base_pitch);
    cfg.pitch_jitter = j.value("pitch_jitter", cfg.pitch_jitter);
    cfg.image_width = j.value("image_width", cfg.image_width);
    cfg.image_height = j.value("image_height", cfg.image_height);
    cfg.frame_margin_px = j.value("frame_margin_px", cfg.frame_margin_px);
    cfg.validate();
    return cfg;
}

json step_inference_to_json(const StepInferenceResult& result) {
    json detections = json::array();
    for (const DetectionResult& d : result.detections) {
        json e = {{"type", d.type_key},
                  {"keypoint", json::array({d.keypoint.x, d.keypoint.y})},
                  {"votes", d.votes},
                  {"iou", d.iou},
                  {"reproj_error", d.reproj_error}};
        e["pose"] = d.pose ? pose_to_json(*d.pose) : json(nullptr);
        if (!d.error.empty()) e["error"] = d.error;
        detections.push_back(std::move(e));
    }
    return {{"schema", 1}, {"success", result.success}, {"detections", std::move(detections)}};
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path);
    out << dump_json(j);
    if (!out) throw Error("io", "write failed for " + path);
}

}  // namespace brickplan
