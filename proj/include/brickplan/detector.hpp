#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "brickplan/camera.hpp"
#include "brickplan/catalog.hpp"
#include "brickplan/world.hpp"

namespace brickplan {

// One detected component instance in a step image: subpixel keypoint (the
// projected top-surface center), the instance's visible-pixel mask, and for
// single bricks the decoded rotation class. Submodules carry no class; their
// rotation is recovered by synthesis.
struct Detection {
    Vec2 keypoint;
    std::vector<std::int32_t> mask;  // sorted raster indices (rows from the bottom scanline)
    std::optional<SymmetryClass7> rotation_class;
};

// Per-step detections grouped by component type key, in canonical order
// (ascending projected keypoint y then x), independent of placement order.
struct StepObservation {
    int width = 0;
    int height = 0;
    std::map<std::string, std::vector<Detection>> detections;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [k, v] : detections) n += v.size();
        return n;
    }
};

// Ground-truth addition of one step: the component, its world pose and the
// type key used to group equal shapes.
struct StepAddition {
    std::string type_key;
    Component component;
    Pose pose;
};

// Perfect detections derived from ground truth: keypoints are exact
// projections, masks are the first-hit pixels of each new instance in the
// complete step scene (base plus all additions), so later additions can
// occlude earlier ones.
StepObservation oracle_detect(const VoxelWorld& base, const std::vector<StepAddition>& additions,
                              const CameraParams& cam);

// Synthetic detector degradation. Keypoints get isotropic Gaussian noise
// (optionally redrawn until under `keypoint_truncate` pixels); rotation
// classes flip to a uniformly different class valid for the same symmetry
// order with probability `rotation_flip_prob`; masks are dilated or eroded
// (fair coin per detection) by `mask_morph_radius` pixels. All draws are
// seeded and consumed in canonical detection order.
struct NoiseSpec {
    double keypoint_sigma = 0.0;
    double keypoint_truncate = 0.0;  // 0 disables truncation
    double rotation_flip_prob = 0.0;
    int mask_morph_radius = 0;
    std::uint64_t seed = 0;
};

StepObservation noisy_detect(const StepObservation& oracle, const NoiseSpec& noise);

// Run-length coding for masks: [start, length, start, length, ...] over
// sorted raster indices.
std::vector<std::int32_t> mask_to_rle(const std::vector<std::int32_t>& mask);
std::vector<std::int32_t> rle_to_mask(const std::vector<std::int32_t>& rle);

}  // namespace brickplan
