#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "brickplan/camera.hpp"
#include "brickplan/catalog.hpp"
#include "brickplan/detector.hpp"
#include "brickplan/world.hpp"

namespace brickplan {

// Pose inference from step observations. Translation candidates come from the
// connection constraint: because the camera is weak-perspective, the image
// offset between a component's keypoint and each of its anti-studs is a
// camera constant independent of depth, so every observed keypoint projects a
// set of 2D anti-stud positions that can be matched against projected studs
// of the partially built shape. Each matched pair implies one lattice
// translation; majority voting plus validity filtering ranks them.
struct InferOptions {
    // Matching tolerance in pixels is tau_factor * camera scale.
    double tau_factor = 0.35;
    // Candidates scored against the mask per (rotation, keypoint choice).
    int max_candidates = 32;
    // Score candidates by rendering them into the scene and comparing with
    // the observed mask (occlusion aware). Disable to rank by votes alone.
    bool verify_with_mask = true;
    // Submodule rotation search: full synthesis, or a seeded uniform draw
    // (ablation baseline).
    enum class RotationMode { Synthesis, RandomBaseline } rotation_mode = RotationMode::Synthesis;
    std::uint64_t random_rotation_seed = 0;
};

struct TranslationCandidate {
    GridVec translation;      // half-units
    int votes = 0;            // matched connector pairs consistent with it
    double reproj_error = 0;  // keypoint reprojection distance in pixels
};

// Image-space offsets from the component keypoint to each anti-stud under
// rotation r (translation independent).
std::vector<Vec2> antistud_offsets_2d(const Catalog& catalog, const Component& component,
                                      Rotation r, const CameraParams& cam);

// Ranked translation candidates for a component with known rotation, given
// the observed keypoint. Matching considers base studs against the
// component's anti-studs, accessible base anti-studs against the component's
// studs (attachment from below), and ground-level cell centers (the ground
// plane is a universal connector). Candidates that collide or leave the grid
// are dropped. With an empty base, ground translations are enumerated
// directly and ranked by reprojection error. Empty result means no candidate.
std::vector<TranslationCandidate> infer_translation(const Vec2& keypoint, const Catalog& catalog,
                                                    const Component& component, Rotation r,
                                                    const VoxelWorld& base,
                                                    const CameraParams& cam,
                                                    const InferOptions& opts = {});

struct PoseHypothesis {
    Pose pose;
    double iou = 0.0;        // against the observed mask; 0 when both empty
    int votes = 0;
    double reproj_error = 0.0;
    int keypoint_choice = 0;  // 0 primary, 1.. alternates (tied topmost parts)
};

// Joint search over symmetry-reduced rotations, keypoint alternates and
// translation candidates; each hypothesis is rendered into the scene
// (occluders included) and scored by mask IoU. Ties break by votes, then
// reprojection error, then lexicographic pose.
std::optional<PoseHypothesis> infer_rotation_by_synthesis(const Detection& det,
                                                          const Catalog& catalog,
                                                          const Component& component,
                                                          const VoxelWorld& base,
                                                          const CameraParams& cam,
                                                          const InferOptions& opts = {});

// Component type directory for a step: maps observation type keys to shapes.
struct ComponentSpec {
    std::string type_key;
    Component component;
    int count = 1;
};

struct DetectionResult {
    std::string type_key;
    Vec2 keypoint;
    std::optional<Pose> pose;
    int votes = 0;
    double iou = 0.0;
    double reproj_error = 0.0;
    int keypoint_choice = 0;
    std::string error;  // e.g. "no_candidate" when pose is empty
};

struct StepInferenceResult {
    std::vector<DetectionResult> detections;
    bool success = false;  // true when every detection got a pose
};

// Resolves all detections of one step against a base shape. Detections are
// processed in canonical order (single bricks before submodules); accepted
// poses go into a scratch copy of the base so same-step stacking works, with
// exact mask fits accepted first and the rest resolved best-first. Bricks
// take their rotation from the detected rotation class; submodules search by
// synthesis. The result is independent of the order detections arrive in.
StepInferenceResult infer_step(const StepObservation& obs, const std::vector<ComponentSpec>& specs,
                               const VoxelWorld& base, const CameraParams& cam,
                               const InferOptions& opts = {});

// Post-processing baseline for continuous translation predictions: round to
// the half-unit lattice, then search the 5^3 displacement neighborhood
// (0, -0.5, +0.5, -1, +1 per axis) for the valid (connected, collision-free)
// pose closest to the rounded point; the rounded pose is returned unchanged
// when the whole neighborhood is invalid.
Pose quantize_pose_baseline(const Vec3& raw_translation_units, const Catalog& catalog,
                            const Component& component, Rotation r, const VoxelWorld& base);

// Unit-brick placement rule for voxel-building scenes: among empty unit cells
// that are on the ground or 6-adjacent to an existing brick, pick the one
// whose projected center is nearest the observed keypoint; ties resolve to
// the lexicographically smallest (x, y, z) cell. Returns unit-cell
// coordinates, or nothing when no valid cell exists.
std::optional<GridVec> craft_infer_translation(const Vec2& keypoint, const VoxelWorld& base,
                                               const CameraParams& cam);

}  // namespace brickplan
