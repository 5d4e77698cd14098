#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "brickplan/detector.hpp"
#include "brickplan/infer.hpp"
#include "brickplan/mangen.hpp"
#include "brickplan/world.hpp"

namespace brickplan {

struct PosedComponent {
    Component component;
    Pose pose;
};

struct AccuracyResult {
    int total = 0;
    int correct = 0;
    double fraction = 0.0;  // correct / total; 1.0 when both lists are empty
    bool all_correct = false;
};

// Componentwise pose accuracy between prediction and ground truth over the
// same component multiset. Same-shape components are matched by minimum-cost
// assignment on exact-translation agreement; a matched component is correct
// when its translation matches exactly and its rotation matches modulo the
// component's symmetry order. Throws CountMismatch when the multisets differ.
AccuracyResult pose_accuracy(const Catalog& catalog, const std::vector<PosedComponent>& pred,
                             const std::vector<PosedComponent>& gt);

struct ChamferOptions {
    int n_points = 10000;
    std::uint64_t seed = 0;
    // Shared normalization box (half-units). Both shapes are translated and
    // uniformly scaled by this box's longest axis into the unit cube before
    // sampling; defaults to the union of both content boxes.
    std::optional<Bounds> norm_bbox;
};

// Symmetric Chamfer distance between the voxel surface meshes: the sum over
// both directions of the mean squared nearest-neighbor distance between
// n_points uniform surface samples. Identical occupancies share one sample
// set and return exactly 0. Both empty -> 0; exactly one empty -> EmptyShape.
double chamfer(const VoxelWorld& a, const VoxelWorld& b, const ChamferOptions& opts = {});

struct ExecOptions {
    enum class Source { GroundTruth, Pipeline };

    Source source = Source::Pipeline;
    // Teacher-forced: every step's inference sees the ground-truth base
    // world (the Mistakes-to-Complete protocol). Otherwise each step sees
    // the previously predicted world (autoregressive).
    bool teacher_forced = false;
    InferOptions infer;
    std::optional<NoiseSpec> noise;  // perturb oracle observations per step
    std::uint64_t seed = 0;          // per-step noise / rotation-draw fan-out
    ChamferOptions chamfer;
};

struct StepReport {
    int image_index = -1;
    std::string scope;  // "" for the root assembly, else the submodule key
    int components = 0;
    int correct = 0;
    bool all_correct = false;
    std::vector<std::string> failures;  // skipped components, with reasons
};

struct ExecutionReport {
    std::vector<StepReport> steps;
    int total_components = 0;
    int correct_components = 0;
    double componentwise = 0.0;  // pooled component accuracy
    double stepwise = 0.0;       // fraction of fully correct steps
    double mtc = 0.0;            // fraction of steps with any mistake
    double chamfer_raw = 0.0;    // predicted final shape vs ground truth
    double chamfer_scaled = 0.0;  // raw * 1e5
    std::string chamfer_error;   // set when the distance is undefined
};

// Distinct component types a step adds, with their counts; the inference
// entry point takes these as the expected-component list.
std::vector<ComponentSpec> step_component_specs(const StepSpec& step);

// A translation no valid placement can have (world voxels satisfy y >= 0);
// stands in for failed components so scoring multisets stay aligned.
inline constexpr GridVec kUnplacedTranslation{0, -9998, 0};

// Optional override for where step observations come from (e.g. dataset
// files); the default regenerates oracle observations from the plan's
// ground-truth bases, noised when ExecOptions.noise is set.
using ObservationProvider =
    std::function<StepObservation(const StepSpec& step, const VoxelWorld& gt_base)>;

// Executes every step of the plan in tree order (submodule subtrees first).
// Poses come from the plan itself (Source::GroundTruth) or from the
// detection+inference pipeline. Placement failures are recorded and skipped.
// The final-shape Chamfer distance uses the ground-truth bounding box for
// normalization.
ExecutionReport execute_plan(const AssemblyPlan& plan, const Catalog& catalog,
                             const ExecOptions& opts,
                             const ObservationProvider& observations = {});

}  // namespace brickplan
