#include "brickplan/exec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "brickplan/error.hpp"
#include "brickplan/rng.hpp"

namespace brickplan {

namespace {

// Maximum bipartite matching (augmenting paths) between prediction and
// ground-truth indices whose translations agree exactly. For 0/1 mismatch
// costs this is the minimum-cost assignment: it maximizes the number of
// exact-translation pairs, and every unmatched pair is wrong regardless of
// how it is paired.
class TranslationMatcher {
  public:
    TranslationMatcher(const std::vector<const Pose*>& pred, const std::vector<const Pose*>& gt)
        : adj_(pred.size()), match_gt_(gt.size(), -1) {
        for (std::size_t i = 0; i < pred.size(); ++i)
            for (std::size_t j = 0; j < gt.size(); ++j)
                if (pred[i]->translation == gt[j]->translation) adj_[i].push_back(j);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            std::vector<char> visited(gt.size(), 0);
            try_augment(i, visited);
        }
    }

    // gt index matched to this prediction, or -1.
    int gt_for(std::size_t pred_index) const {
        for (std::size_t j = 0; j < match_gt_.size(); ++j)
            if (match_gt_[j] == static_cast<int>(pred_index)) return static_cast<int>(j);
        return -1;
    }

  private:
    bool try_augment(std::size_t i, std::vector<char>& visited) {
        for (std::size_t j : adj_[i]) {
            if (visited[j]) continue;
            visited[j] = 1;
            if (match_gt_[j] < 0 || try_augment(match_gt_[j], visited)) {
                match_gt_[j] = static_cast<int>(i);
                return true;
            }
        }
        return false;
    }

    std::vector<std::vector<std::size_t>> adj_;
    std::vector<int> match_gt_;
};

struct ShapeGroupKey {
    Component component;

    bool operator<(const ShapeGroupKey& o) const { return component < o.component; }
};

}  // namespace

AccuracyResult pose_accuracy(const Catalog& catalog, const std::vector<PosedComponent>& pred,
                             const std::vector<PosedComponent>& gt) {
    std::map<ShapeGroupKey, std::pair<std::vector<const Pose*>, std::vector<const Pose*>>> groups;
    for (const PosedComponent& p : pred) groups[{p.component}].first.push_back(&p.pose);
    for (const PosedComponent& g : gt) groups[{g.component}].second.push_back(&g.pose);
    for (const auto& [key, lists] : groups)
        if (lists.first.size() != lists.second.size())
            throw CountMismatch("prediction and ground truth disagree on a component's count (" +
                                std::to_string(lists.first.size()) + " vs " +
                                std::to_string(lists.second.size()) + ")");

    AccuracyResult out;
    out.total = static_cast<int>(gt.size());
    for (const auto& [key, lists] : groups) {
        const int order = resolve(catalog, key.component).symmetry_order;
        TranslationMatcher matcher(lists.first, lists.second);
        for (std::size_t i = 0; i < lists.first.size(); ++i) {
            const int j = matcher.gt_for(i);
            if (j < 0) continue;  // translation mismatch: wrong
            if (rotation_equivalent(order, lists.first[i]->rotation, lists.second[j]->rotation))
                ++out.correct;
        }
    }
    out.fraction = out.total == 0 ? 1.0 : static_cast<double>(out.correct) / out.total;
    out.all_correct = out.correct == out.total;
    return out;
}

namespace {

// Boundary faces of the voxel occupancy; each is an axis-aligned half-unit
// square. Order follows the deterministic occupied-cell scan.
struct Face {
    GridVec cell;
    int axis;      // 0, 1, 2
    int positive;  // 1 when the face normal points toward +axis
};

std::vector<Face> boundary_faces(const VoxelWorld& w) {
    static constexpr GridVec kNeighbors[6] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                              {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
    std::vector<Face> faces;
    for (const GridVec& c : w.occupied_cells())
        for (int n = 0; n < 6; ++n)
            if (!w.occupied(c + kNeighbors[n])) faces.push_back({c, n / 2, (n % 2 == 0) ? 1 : 0});
    return faces;
}

Vec3 sample_face_point(const Face& f, double u, double v) {
    // Cell spans [cell, cell + 1] in half-units, i.e. a 0.5-unit cube.
    double p[3] = {f.cell.x * 0.5, f.cell.y * 0.5, f.cell.z * 0.5};
    p[f.axis] += f.positive ? 0.5 : 0.0;
    p[(f.axis + 1) % 3] += 0.5 * u;
    p[(f.axis + 2) % 3] += 0.5 * v;
    return {p[0], p[1], p[2]};
}

std::vector<Vec3> sample_surface(const VoxelWorld& w, int n, Rng& rng, const Vec3& origin,
                                 double inv_scale) {
    const std::vector<Face> faces = boundary_faces(w);
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        const Face& f = faces[rng.uniform_index(faces.size())];
        const Vec3 p = sample_face_point(f, rng.uniform(), rng.uniform());
        pts.push_back({(p.x - origin.x) * inv_scale, (p.y - origin.y) * inv_scale,
                       (p.z - origin.z) * inv_scale});
    }
    return pts;
}

// Exact nearest-neighbor queries over a uniform grid: shells are scanned
// outward and the search stops once no farther shell can beat the best hit.
class NnGrid {
  public:
    explicit NnGrid(const std::vector<Vec3>& pts) : pts_(pts) {
        lo_ = {0, 0, 0};
        double hi = 1.0;
        for (const Vec3& p : pts) {
            lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y), std::min(lo_.z, p.z)};
            hi = std::max({hi, p.x, p.y, p.z});
        }
        cell_ = std::max((hi - std::min({lo_.x, lo_.y, lo_.z})) / 32.0, 1e-9);
        for (std::size_t i = 0; i < pts.size(); ++i) buckets_[key_of(pts[i])].push_back(i);
    }

    double nearest_sq(const Vec3& q) const {
        const Key qk = key_of(q);
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0;; ++r) {
            scan_shell(q, qk, r, best);
            const double safe = static_cast<double>(r) * cell_;
            if (best <= safe * safe) return best;
            if (r > 96) {  // beyond any occupied shell: fall back to a full scan
                for (const Vec3& p : pts_) best = std::min(best, dist_sq(p, q));
                return best;
            }
        }
    }

  private:
    struct Key {
        int x, y, z;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::size_t h = 1469598103934665603ull;
            for (int v : {k.x, k.y, k.z}) {
                h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull;
                h *= 1099511628211ull;
            }
            return h;
        }
    };

    static double dist_sq(const Vec3& a, const Vec3& b) {
        const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
        return dx * dx + dy * dy + dz * dz;
    }

    Key key_of(const Vec3& p) const {
        return {static_cast<int>(std::floor((p.x - lo_.x) / cell_)),
                static_cast<int>(std::floor((p.y - lo_.y) / cell_)),
                static_cast<int>(std::floor((p.z - lo_.z) / cell_))};
    }

    void scan_shell(const Vec3& q, const Key& qk, int r, double& best) const {
        for (int dx = -r; dx <= r; ++dx)
            for (int dy = -r; dy <= r; ++dy)
                for (int dz = -r; dz <= r; ++dz) {
                    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
                    auto it = buckets_.find({qk.x + dx, qk.y + dy, qk.z + dz});
                    if (it == buckets_.end()) continue;
                    for (std::size_t i : it->second) best = std::min(best, dist_sq(pts_[i], q));
                }
    }

    const std::vector<Vec3>& pts_;
    Vec3 lo_;
    double cell_ = 1.0;
    std::unordered_map<Key, std::vector<std::size_t>, KeyHash> buckets_;
};

double mean_nearest_sq(const std::vector<Vec3>& from, const NnGrid& to) {
    double sum = 0.0;
    for (const Vec3& p : from) sum += to.nearest_sq(p);
    return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer(const VoxelWorld& a, const VoxelWorld& b, const ChamferOptions& opts) {
    if (opts.n_points <= 0) throw ValidationError("chamfer: n_points must be positive");
    const bool a_empty = a.instance_count() == 0;
    const bool b_empty = b.instance_count() == 0;
    if (a_empty && b_empty) return 0.0;
    if (a_empty || b_empty) throw EmptyShape("chamfer: exactly one shape is empty");
    // Identical occupancies share one sample set, giving an exact zero.
    if (a.same_cells(b)) return 0.0;

    Bounds norm;
    if (opts.norm_bbox) {
        norm = *opts.norm_bbox;
    } else {
        const Bounds ba = a.content_bounds(), bb = b.content_bounds();
        norm.min = {std::min(ba.min.x, bb.min.x), std::min(ba.min.y, bb.min.y),
                    std::min(ba.min.z, bb.min.z)};
        norm.max = {std::max(ba.max.x, bb.max.x), std::max(ba.max.y, bb.max.y),
                    std::max(ba.max.z, bb.max.z)};
    }
    const Vec3 origin = {norm.min.x * 0.5, norm.min.y * 0.5, norm.min.z * 0.5};
    const int longest =
        std::max({norm.max.x - norm.min.x, norm.max.y - norm.min.y, norm.max.z - norm.min.z});
    if (longest <= 0) throw ValidationError("chamfer: normalization box is empty");
    const double inv_scale = 2.0 / longest;  // half-units -> unit cube

    Rng rng_a = Rng::substream(opts.seed, "chamfer_a");
    Rng rng_b = Rng::substream(opts.seed, "chamfer_b");
    const std::vector<Vec3> pa = sample_surface(a, opts.n_points, rng_a, origin, inv_scale);
    const std::vector<Vec3> pb = sample_surface(b, opts.n_points, rng_b, origin, inv_scale);
    const NnGrid ga(pa), gb(pb);
    return mean_nearest_sq(pa, gb) + mean_nearest_sq(pb, ga);
}

std::vector<ComponentSpec> step_component_specs(const StepSpec& step) {
    std::map<std::string, ComponentSpec> by_key;
    for (const PlannedComponent& a : step.additions) {
        auto [it, fresh] = by_key.emplace(a.type_key, ComponentSpec{a.type_key, a.component, 0});
        ++it->second.count;
    }
    std::vector<ComponentSpec> out;
    for (auto& [key, spec] : by_key) out.push_back(std::move(spec));
    return out;
}

namespace {

// Ground-truth components of one step as scoring lists.
std::vector<PosedComponent> gt_components(const StepSpec& step) {
    std::vector<PosedComponent> out;
    for (const PlannedComponent& a : step.additions) out.push_back({a.component, a.pose});
    return out;
}

struct SequenceContext {
    const AssemblyPlan& plan;
    const Catalog& catalog;
    const ExecOptions& opts;
    const ObservationProvider& observations;
    ExecutionReport& report;
    VoxelWorld* final_pred = nullptr;  // root sequence's predicted world
};

void run_sequence(SequenceContext& ctx, const std::vector<StepSpec>& steps,
                  const std::string& scope, bool is_root) {
    VoxelWorld gt(ctx.catalog, ctx.plan.world_dims);
    VoxelWorld pred(ctx.catalog, ctx.plan.world_dims);

    for (const StepSpec& step : steps) {
        StepReport rep;
        rep.image_index = step.image_index;
        rep.scope = scope;

        std::vector<PosedComponent> gt_list = gt_components(step);
        std::vector<PosedComponent> pred_list;

        if (ctx.opts.source == ExecOptions::Source::GroundTruth) {
            pred_list = gt_list;
        } else {
            const VoxelWorld& base = ctx.opts.teacher_forced ? gt : pred;
            StepObservation obs;
            if (ctx.observations) {
                obs = ctx.observations(step, gt);
            } else {
                std::vector<StepAddition> additions;
                for (const PlannedComponent& a : step.additions)
                    additions.push_back({a.type_key, a.component, a.pose});
                obs = oracle_detect(gt, additions, step.camera);
                if (ctx.opts.noise) {
                    NoiseSpec noise = *ctx.opts.noise;
                    noise.seed = Rng::derive_seed(ctx.opts.seed,
                                                  "noise_" + std::to_string(step.image_index));
                    obs = noisy_detect(obs, noise);
                }
            }
            InferOptions infer_opts = ctx.opts.infer;
            infer_opts.random_rotation_seed = Rng::derive_seed(
                ctx.opts.seed, "rotation_" + std::to_string(step.image_index));
            const std::vector<ComponentSpec> specs = step_component_specs(step);
            StepInferenceResult inferred;
            try {
                inferred = infer_step(obs, specs, base, step.camera, infer_opts);
            } catch (const Error& e) {
                rep.failures.push_back(std::string("step: ") + e.what());
            }
            std::map<std::string, const Component*> comp_of;
            for (const ComponentSpec& s : specs) comp_of.emplace(s.type_key, &s.component);
            for (const DetectionResult& d : inferred.detections) {
                PosedComponent pc{*comp_of.at(d.type_key), Pose{kUnplacedTranslation, Rotation{0}}};
                if (d.pose) {
                    pc.pose = *d.pose;
                } else {
                    rep.failures.push_back(d.type_key + ": " +
                                           (d.error.empty() ? "no pose" : d.error));
                }
                pred_list.push_back(std::move(pc));
            }
            // A thrown inference leaves the whole step unplaced; pad so the
            // scoring multisets still line up.
            for (std::size_t i = pred_list.size(); i < gt_list.size(); ++i)
                pred_list.push_back(
                    {gt_list[i].component, Pose{kUnplacedTranslation, Rotation{0}}});
        }

        const AccuracyResult acc = pose_accuracy(ctx.catalog, pred_list, gt_list);
        rep.components = acc.total;
        rep.correct = acc.correct;
        rep.all_correct = acc.all_correct && rep.failures.empty();

        // Carry predictions forward. Within a step, components may depend on
        // each other in either vertical direction (stacked or under-mounted),
        // so place whatever connects each pass until a fixpoint; leftovers
        // are genuine failures.
        std::vector<const PosedComponent*> pending;
        for (const PosedComponent& pc : pred_list)
            if (pc.pose.translation != kUnplacedTranslation) pending.push_back(&pc);
        std::sort(pending.begin(), pending.end(), [](const PosedComponent* x,
                                                     const PosedComponent* y) {
            return std::tie(x->pose.translation.y, x->pose.translation.x,
                            x->pose.translation.z) < std::tie(y->pose.translation.y,
                                                              y->pose.translation.x,
                                                              y->pose.translation.z);
        });
        bool progress = true;
        while (progress && !pending.empty()) {
            progress = false;
            std::vector<const PosedComponent*> next;
            for (const PosedComponent* pc : pending) {
                if (pred.can_place(pc->component, pc->pose)) {
                    pred.place(pc->component, pc->pose, "pred");
                    progress = true;
                } else {
                    next.push_back(pc);
                }
            }
            pending = std::move(next);
        }
        for (const PosedComponent* pc : pending) {
            try {
                pred.place(pc->component, pc->pose, "pred");
            } catch (const Error& e) {
                rep.failures.push_back(std::string("place: ") + e.what());
            }
        }
        for (const PlannedComponent& a : step.additions) gt.place(a.component, a.pose, a.type_key);

        ctx.report.steps.push_back(std::move(rep));
    }

    if (is_root && ctx.final_pred) *ctx.final_pred = std::move(pred);
}

}  // namespace

ExecutionReport execute_plan(const AssemblyPlan& plan, const Catalog& catalog,
                             const ExecOptions& opts, const ObservationProvider& observations) {
    ExecutionReport report;
    VoxelWorld final_pred(catalog, plan.world_dims);
    SequenceContext ctx{plan, catalog, opts, observations, report, &final_pred};

    for (const SubmoduleDef& def : plan.submodules) run_sequence(ctx, def.steps, def.key, false);
    run_sequence(ctx, plan.steps, "", true);

    int wrong_steps = 0;
    for (const StepReport& rep : report.steps) {
        report.total_components += rep.components;
        report.correct_components += rep.correct;
        if (!rep.all_correct) ++wrong_steps;
    }
    const int n_steps = static_cast<int>(report.steps.size());
    report.componentwise = report.total_components == 0
                               ? 1.0
                               : static_cast<double>(report.correct_components) /
                                     report.total_components;
    report.stepwise = n_steps == 0 ? 1.0 : 1.0 - static_cast<double>(wrong_steps) / n_steps;
    report.mtc = n_steps == 0 ? 0.0 : static_cast<double>(wrong_steps) / n_steps;

    const VoxelWorld gt_final = replay_plan(plan, catalog);
    ChamferOptions copts = opts.chamfer;
    if (!copts.norm_bbox && gt_final.instance_count() > 0)
        copts.norm_bbox = gt_final.content_bounds();
    try {
        report.chamfer_raw = chamfer(final_pred, gt_final, copts);
        report.chamfer_scaled = report.chamfer_raw * 1e5;
    } catch (const Error& e) {
        report.chamfer_error = e.what();
    }
    return report;
}

}  // namespace brickplan
