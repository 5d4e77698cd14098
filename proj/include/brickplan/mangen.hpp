#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "brickplan/camera.hpp"
#include "brickplan/catalog.hpp"
#include "brickplan/rng.hpp"
#include "brickplan/world.hpp"

namespace brickplan {

// Knobs for the synthetic dataset generator. Every range is inclusive; sizes
// are in grid units (1 unit = one stud pitch = one brick height).
struct GenConfig {
    std::uint64_t seed = 0;
    GridVec world_dims{130, 130, 130};  // voxels (half-units)

    // Final-shape bounding box: x extent, z extent, and the stack height cap.
    int min_length = 6, max_length = 14;
    int min_width = 6, max_width = 14;
    int min_height = 3, max_height = 8;

    // Component-adding strategies: single primitive, stacked submodule in a
    // small box, tower of one repeated primitive.
    double w_single = 0.5;
    double w_submodule = 0.25;
    double w_tower = 0.25;
    double edge_grow_prob = 0.5;       // per box: grow its edges before filling
    double submodule_reuse_prob = 0.5; // reuse an already-built submodule type
    int max_submodule_parts = 4;
    int submodule_depth = 2;           // upper bound on submodule nesting
    int attempt_budget = 200;          // placement attempts per box

    // Manual decomposition: per-step limits and the visibility cutoff for
    // deciding which removable components may leave in the same step.
    int max_chunk_instances = 10;
    int max_chunk_types = 5;
    double visibility_threshold = 0.5;

    // Camera sampling. Scale is drawn from [min_scale, max_scale] and then
    // reduced if needed so the shape fits in frame; translation is drawn in
    // [-1, 1]^2 and mapped onto the in-frame interval.
    double min_scale = 1.0, max_scale = 5.0;
    double base_roll = 0.0, roll_jitter = 0.0;
    double base_yaw = 225.0, yaw_jitter = 10.0;
    double base_pitch = 30.0, pitch_jitter = 10.0;
    int image_width = 512, image_height = 512;
    int frame_margin_px = 8;

    void validate() const;  // throws ValidationError on bad limits or ranges
};

// One component added by a step, together with the key naming its type
// (a catalog brick id or a generated submodule key).
struct PlannedComponent {
    std::string type_key;
    Component component;
    Pose pose;
};

// One manual step: the components it adds on top of the preceding state.
// Steps replay in order; `relaxed_visibility` marks steps whose chunk had to
// ignore the visibility test because nothing removable passed it.
struct StepSpec {
    std::vector<PlannedComponent> additions;
    bool relaxed_visibility = false;
    int image_index = -1;  // global manual/observation index, assigned at emit
    CameraParams camera;
};

// A submodule's own assembly sequence (a subtree of the manual). The steps
// build the flattened component from an empty world at a canonical pose.
struct SubmoduleDef {
    std::string key;
    Component component;
    std::vector<StepSpec> steps;
};

// Tree-structured manual: submodule subtrees first, then the root assembly.
struct AssemblyPlan {
    GridVec world_dims{130, 130, 130};
    CameraParams camera;
    std::vector<SubmoduleDef> submodules;
    std::vector<StepSpec> steps;

    int total_steps() const;
};

struct BuildResult {
    VoxelWorld world;
    std::map<std::string, Component> submodules;  // key -> flattened definition
};

// Forward stage: partition a sampled bounding box into smaller boxes and fill
// each with randomly chosen components (optionally growing box edges first),
// rejecting placements that would collide, float or leave the box. Seeded and
// deterministic. Throws GenerationExhausted when nothing could be placed.
BuildResult forward_build(const GenConfig& cfg, const Catalog& catalog);

// Samples a camera whose frame contains the given world-content bounds.
CameraParams sample_camera(const GenConfig& cfg, const Bounds& content, Rng& rng);

// Backward stage: repeatedly peel off chunks of removable, sufficiently
// visible components (honoring the per-step limits), then reverse the removal
// order into a build-order plan. Submodule types used anywhere get their own
// decomposed subtree.
AssemblyPlan backward_decompose(const VoxelWorld& final_world, const GenConfig& cfg,
                                const CameraParams& camera,
                                const std::map<std::string, Component>& submodules);

// Replays a plan's root steps (submodule additions placed whole) into a fresh
// world; used for round-trip validation and ground-truth execution.
VoxelWorld replay_plan(const AssemblyPlan& plan, const Catalog& catalog);

struct SetResult {
    std::string name;
    std::uint64_t seed = 0;
    int steps = 0;
    int instances = 0;
    std::string error;  // empty on success
};

struct DatasetResult {
    std::vector<SetResult> sets;
    std::string manifest_path;
};

// Generates n_sets independent sets under out_dir (set_<k>/plan.json,
// camera.json, world.json, steps/<i>.png, steps/<i>.obs.json) plus a
// manifest.json with per-set seeds and outcomes. Set failures are recorded in
// the manifest without aborting the batch. `jobs` > 1 generates sets in
// parallel; outputs are byte-identical either way.
DatasetResult emit_dataset(const GenConfig& cfg, int n_sets, const Catalog& catalog,
                           const std::string& out_dir, int jobs = 1);

}  // namespace brickplan
