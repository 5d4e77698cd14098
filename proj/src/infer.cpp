#include "brickplan/infer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <unordered_map>

#include "brickplan/error.hpp"
#include "brickplan/rng.hpp"

namespace brickplan {

namespace {

// ---------------------------------------------------------------------------
// Candidate generation

struct Connector {
    GridVec position;  // world, half-units
    Vec2 projected;
};

// 2D bucket index for radius queries over projected connector points.
class PointIndex {
  public:
    PointIndex(double cell) : cell_(cell > 0 ? cell : 1.0) {}

    void add(const Connector& c) {
        buckets_[key(c.projected)].push_back(points_.size());
        points_.push_back(c);
    }

    template <typename F>
    void for_each_within(const Vec2& q, double radius, F&& f) const {
        const auto [kx, ky] = key(q);
        const int r = static_cast<int>(std::ceil(radius / cell_)) + 1;
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                auto it = buckets_.find({kx + dx, ky + dy});
                if (it == buckets_.end()) continue;
                for (std::size_t i : it->second) {
                    const Connector& c = points_[i];
                    if ((c.projected - q).norm() <= radius) f(c);
                }
            }
        }
    }

  private:
    std::pair<int, int> key(const Vec2& p) const {
        return {static_cast<int>(std::floor(p.x / cell_)), static_cast<int>(std::floor(p.y / cell_))};
    }

    struct KeyHash {
        std::size_t operator()(const std::pair<int, int>& k) const {
            return std::hash<long long>()((static_cast<long long>(k.first) << 32) ^
                                          static_cast<unsigned>(k.second));
        }
    };

    double cell_;
    std::vector<Connector> points_;
    std::unordered_map<std::pair<int, int>, std::vector<std::size_t>, KeyHash> buckets_;
};

// Connector sets of the base shape relevant to matching: available studs,
// accessible anti-studs (for attachment from below), and ground-level cell
// centers, which act as studs of the ground plane for any component resting
// at y = 0 on the unit lattice.
struct BaseConnectors {
    PointIndex studs;       // base studs + virtual ground studs
    PointIndex anti_studs;  // accessible base anti-studs

    BaseConnectors(double bucket) : studs(bucket), anti_studs(bucket) {}
};

BaseConnectors collect_base_connectors(const VoxelWorld& base, const CameraParams& cam,
                                       double bucket) {
    BaseConnectors out(bucket);
    for (const StudPoint& s : base.studs_of())
        out.studs.add({s.position, project(cam, to_units(s.position))});
    for (const StudPoint& a : base.anti_studs_of())
        out.anti_studs.add({a.position, project(cam, to_units(a.position))});
    const GridVec dims = base.dims();
    for (int i = 0; 2 * i + 1 < dims.x; ++i) {
        for (int j = 0; 2 * j + 1 < dims.z; ++j) {
            const GridVec g{2 * i + 1, 0, 2 * j + 1};
            out.studs.add({g, project(cam, to_units(g))});
        }
    }
    return out;
}

bool fits(const VoxelWorld& base, const ComponentGeom& geom, const GridVec& t) {
    for (const GridVec& v : geom.voxels) {
        const GridVec w = v + t;
        if (w.x < 0 || w.y < 0 || w.z < 0 || w.x >= base.dims().x || w.y >= base.dims().y ||
            w.z >= base.dims().z)
            return false;
        if (base.occupied(w)) return false;
    }
    return true;
}

GridVec keypoint_of(const ComponentGeom& geom, int choice) {
    return choice == 0 ? geom.keypoint : geom.alternate_keypoints[choice - 1];
}

std::vector<TranslationCandidate> candidate_translations(const Vec2& keypoint,
                                                         const ComponentGeom& geom, int kp_choice,
                                                         const VoxelWorld& base,
                                                         const BaseConnectors& connectors,
                                                         const CameraParams& cam, double tau,
                                                         int max_candidates) {
    const GridVec kp3 = keypoint_of(geom, kp_choice);
    std::map<GridVec, int> votes;

    // Component anti-studs against base/ground studs.
    for (const GridVec& a : geom.anti_studs) {
        const Vec2 off = project_offset(cam, to_units(a - kp3));
        const Vec2 pos = keypoint + off;
        connectors.studs.for_each_within(pos, tau,
                                         [&](const Connector& c) { ++votes[c.position - a]; });
    }
    // Component studs against accessible base anti-studs (mounting from
    // below an overhang).
    for (const GridVec& s : geom.studs) {
        const Vec2 off = project_offset(cam, to_units(s - kp3));
        const Vec2 pos = keypoint + off;
        connectors.anti_studs.for_each_within(pos, tau,
                                              [&](const Connector& c) { ++votes[c.position - s]; });
    }

    std::vector<TranslationCandidate> out;
    for (const auto& [t, n] : votes) {
        if (!fits(base, geom, t)) continue;
        TranslationCandidate c;
        c.translation = t;
        c.votes = n;
        c.reproj_error = (project(cam, to_units(kp3 + t)) - keypoint).norm();
        out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [](const TranslationCandidate& a, const TranslationCandidate& b) {
        if (a.votes != b.votes) return a.votes > b.votes;
        if (a.reproj_error != b.reproj_error) return a.reproj_error < b.reproj_error;
        return a.translation < b.translation;
    });
    if (static_cast<int>(out.size()) > max_candidates) out.resize(max_candidates);
    return out;
}

std::vector<TranslationCandidate> ground_enumeration(const Vec2& keypoint,
                                                     const ComponentGeom& geom, int kp_choice,
                                                     const VoxelWorld& base,
                                                     const CameraParams& cam, int max_candidates) {
    const GridVec kp3 = keypoint_of(geom, kp_choice);
    std::vector<TranslationCandidate> out;
    const int ty = -geom.bbox.min.y;  // rest on the ground plane
    for (int tx = -geom.bbox.min.x; tx <= base.dims().x - geom.bbox.max.x; ++tx) {
        for (int tz = -geom.bbox.min.z; tz <= base.dims().z - geom.bbox.max.z; ++tz) {
            const GridVec t{tx, ty, tz};
            TranslationCandidate c;
            c.translation = t;
            c.votes = 1;
            c.reproj_error = (project(cam, to_units(kp3 + t)) - keypoint).norm();
            out.push_back(c);
        }
    }
    std::sort(out.begin(), out.end(), [](const TranslationCandidate& a, const TranslationCandidate& b) {
        if (a.reproj_error != b.reproj_error) return a.reproj_error < b.reproj_error;
        return a.translation < b.translation;
    });
    if (static_cast<int>(out.size()) > max_candidates) out.resize(max_candidates);
    return out;
}

// ---------------------------------------------------------------------------
// Mask scoring

struct MaskTarget {
    std::vector<std::uint8_t> mask;    // detection mask bitmap
    std::size_t mask_count = 0;
    std::vector<std::uint8_t> domain;  // 0 where other detections' masks sit
};

MaskTarget make_target(const Detection& det, const std::vector<const Detection*>& others, int width,
                       int height) {
    MaskTarget t;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    t.mask.assign(n, 0);
    t.domain.assign(n, 1);
    for (std::int32_t i : det.mask) {
        if (i < 0 || static_cast<std::size_t>(i) >= n)
            throw ValidationError("mask pixel index outside the image");
        t.mask[i] = 1;
    }
    t.mask_count = det.mask.size();
    for (const Detection* o : others) {
        if (o == &det) continue;
        for (std::int32_t i : o->mask)
            if (i >= 0 && static_cast<std::size_t>(i) < n && !t.mask[i]) t.domain[i] = 0;
    }
    return t;
}

// Renders the candidate and keeps only pixels visible against the scene
// depth buffer, then compares with the observed mask. Pixels claimed by other
// detections in the same step are ignored, since those may later occlude this
// component. Exact fits therefore score exactly 1. Epoch-stamped buffers
// avoid clearing a full image per candidate.
//
// Equal depth needs care: observations break exact-depth ties toward earlier
// instance ids, and a flush sibling from the same step may have been placed
// into the scene already even though the observation ordered it after this
// component. A tie against an id at or above `step_id_floor` (a same-step
// placement) is therefore treated as visible; the masks decide ownership. A
// tie against pre-existing geometry stays occluded, matching the observation.
class CandidateScorer {
  public:
    CandidateScorer(const CameraParams& cam, const Raster& scene_depth, InstanceId step_id_floor)
        : proj_(cam), scene_(scene_depth), floor_(step_id_floor),
          depth_(static_cast<std::size_t>(cam.width) * cam.height, 0.0),
          stamp_(depth_.size(), 0) {}

    double iou(const ComponentGeom& geom, const GridVec& t, const MaskTarget& target) {
        ++epoch_;
        touched_.clear();
        for (const GridVec& v : geom.voxels) {
            proj_.for_each_pixel(v + t, [&](std::size_t i, double d, int) {
                if (stamp_[i] != epoch_) {
                    stamp_[i] = epoch_;
                    depth_[i] = d;
                    touched_.push_back(i);
                } else if (d < depth_[i]) {
                    depth_[i] = d;
                }
            });
        }
        std::size_t rendered = 0, inter = 0;
        for (std::size_t i : touched_) {
            if (depth_[i] > scene_.depth[i]) continue;  // occluded by the scene
            if (depth_[i] == scene_.depth[i] && scene_.ids[i] < floor_) continue;
            if (!target.domain[i]) continue;
            ++rendered;
            if (target.mask[i]) ++inter;
        }
        const std::size_t uni = rendered + target.mask_count - inter;
        if (uni == 0) return 0.0;  // both empty
        return static_cast<double>(inter) / static_cast<double>(uni);
    }

  private:
    VoxelProjector proj_;
    const Raster& scene_;
    InstanceId floor_;
    std::vector<double> depth_;
    std::vector<std::uint32_t> stamp_;
    std::vector<std::size_t> touched_;
    std::uint32_t epoch_ = 0;
};

// With mask verification the silhouette fit dominates and keypoint agreement
// breaks ties. Reprojection error must outrank votes here: a shape resting on
// the ground can collect more connector votes (every ground cell mates) than
// the true pose, and a lattice offset nearly parallel to the view ray can
// rasterize to the same silhouette, but only the true pose reproduces the
// detected keypoint exactly.
struct RankedHypothesis {
    PoseHypothesis h;

    bool better_than(const RankedHypothesis& o, bool with_mask) const {
        if (with_mask && h.iou != o.h.iou) return h.iou > o.h.iou;
        if (with_mask && h.reproj_error != o.h.reproj_error)
            return h.reproj_error < o.h.reproj_error;
        if (h.votes != o.h.votes) return h.votes > o.h.votes;
        if (h.reproj_error != o.h.reproj_error) return h.reproj_error < o.h.reproj_error;
        if (h.pose != o.h.pose) return h.pose < o.h.pose;
        return h.keypoint_choice < o.h.keypoint_choice;
    }

    // An exact silhouette with an exactly reproduced primary keypoint cannot
    // be outranked, so the search may stop at the first one it meets. The
    // primary keypoint is required: at the true rotation it always reproduces
    // the detection, while an alternate keypoint can only coincide with it
    // under a wrong rotation of a shape whose silhouette hides the change.
    bool exact(const MaskTarget& target) const {
        return h.iou == 1.0 && h.reproj_error == 0.0 && h.keypoint_choice == 0 &&
               target.mask_count > 0;
    }
};

struct HypothesisSearch {
    const Catalog* catalog;
    const VoxelWorld* base;
    const CameraParams* cam;
    const InferOptions* opts;
    const BaseConnectors* connectors;
    CandidateScorer* scorer;
    const MaskTarget* target;

    std::optional<PoseHypothesis> best(const Detection& det, const ComponentGeom& local,
                                       const std::vector<Rotation>& rotations) const {
        const double tau = opts->tau_factor * cam->scale;
        const bool with_mask = opts->verify_with_mask && scorer && target;
        std::optional<RankedHypothesis> best;
        for (const Rotation r : rotations) {
            const ComponentGeom geom = rotated(local, r);
            const int choices = 1 + static_cast<int>(geom.alternate_keypoints.size());
            for (int choice = 0; choice < choices; ++choice) {
                std::vector<TranslationCandidate> cands =
                    base->instance_count() == 0
                        ? ground_enumeration(det.keypoint, geom, choice, *base, *cam,
                                             opts->max_candidates)
                        : candidate_translations(det.keypoint, geom, choice, *base, *connectors,
                                                 *cam, tau, opts->max_candidates);
                for (const TranslationCandidate& c : cands) {
                    RankedHypothesis rh;
                    rh.h.pose = Pose{c.translation, r};
                    rh.h.votes = c.votes;
                    rh.h.reproj_error = c.reproj_error;
                    rh.h.keypoint_choice = choice;
                    rh.h.iou = with_mask ? scorer->iou(geom, c.translation, *target) : 0.0;
                    if (std::getenv("BRICKPLAN_TRACE_SEARCH"))
                        std::fprintf(stderr, "    probe t=(%d,%d,%d) r=%d ch=%d votes=%d iou=%.4f rep=%.6g\n",
                                     c.translation.x, c.translation.y, c.translation.z,
                                     r.quarter_turns, choice, c.votes, rh.h.iou, c.reproj_error);
                    if (!best || rh.better_than(*best, with_mask)) best = rh;
                    if (with_mask && rh.exact(*target)) return best->h;
                }
            }
        }
        if (!best) return std::nullopt;
        return best->h;
    }
};

}  // namespace

std::vector<Vec2> antistud_offsets_2d(const Catalog& catalog, const Component& component,
                                      Rotation r, const CameraParams& cam) {
    const ComponentGeom geom = rotated(resolve(catalog, component), r);
    std::vector<Vec2> out;
    out.reserve(geom.anti_studs.size());
    for (const GridVec& a : geom.anti_studs)
        out.push_back(project_offset(cam, to_units(a - geom.keypoint)));
    return out;
}

std::vector<TranslationCandidate> infer_translation(const Vec2& keypoint, const Catalog& catalog,
                                                    const Component& component, Rotation r,
                                                    const VoxelWorld& base,
                                                    const CameraParams& cam,
                                                    const InferOptions& opts) {
    const ComponentGeom geom = rotated(resolve(catalog, component), r);
    if (base.instance_count() == 0)
        return ground_enumeration(keypoint, geom, 0, base, cam, opts.max_candidates);
    const double tau = opts.tau_factor * cam.scale;
    const BaseConnectors connectors = collect_base_connectors(base, cam, tau);
    return candidate_translations(keypoint, geom, 0, base, connectors, cam, tau,
                                  opts.max_candidates);
}

std::optional<PoseHypothesis> infer_rotation_by_synthesis(const Detection& det,
                                                          const Catalog& catalog,
                                                          const Component& component,
                                                          const VoxelWorld& base,
                                                          const CameraParams& cam,
                                                          const InferOptions& opts) {
    const ComponentGeom local = resolve(catalog, component);
    const Raster scene = rasterize(cam, base);
    CandidateScorer scorer(cam, scene, base.next_instance_id());
    MaskTarget target = make_target(det, {}, cam.width, cam.height);
    const double tau = opts.tau_factor * cam.scale;
    const BaseConnectors connectors = collect_base_connectors(base, cam, tau);
    HypothesisSearch search{&catalog, &base, &cam, &opts, &connectors, &scorer, &target};
    return search.best(det, local, reduced_rotations(local.symmetry_order));
}

StepInferenceResult infer_step(const StepObservation& obs, const std::vector<ComponentSpec>& specs,
                               const VoxelWorld& base, const CameraParams& cam,
                               const InferOptions& opts) {
    if (obs.width != cam.width || obs.height != cam.height)
        throw ValidationError("observation and camera image sizes differ");

    struct Item {
        const Detection* det;
        const ComponentSpec* spec;
        ComponentGeom local;
        std::vector<Rotation> rotations;
        bool resolved = false;
        DetectionResult result;
    };

    std::map<std::string, const ComponentSpec*> by_key;
    for (const ComponentSpec& s : specs) {
        if (!by_key.emplace(s.type_key, &s).second)
            throw ValidationError("duplicate component spec for type " + s.type_key);
    }

    Rng rotation_rng = Rng::substream(opts.random_rotation_seed, "rotation_baseline");
    std::vector<Item> items;
    std::vector<const Detection*> all_dets;
    for (const auto& [key, dets] : obs.detections) {
        auto it = by_key.find(key);
        if (it == by_key.end()) throw ValidationError("observation names unknown type " + key);
        if (it->second->count != static_cast<int>(dets.size()))
            throw ValidationError("type " + key + ": expected " +
                                  std::to_string(it->second->count) + " detections, got " +
                                  std::to_string(dets.size()));
        for (const Detection& det : dets) {
            Item item;
            item.det = &det;
            item.spec = it->second;
            item.local = resolve(base.catalog(), it->second->component);
            item.result.type_key = key;
            item.result.keypoint = det.keypoint;
            all_dets.push_back(&det);
            items.push_back(std::move(item));
        }
    }
    for (const ComponentSpec& s : specs)
        if (s.count > 0 && !obs.detections.count(s.type_key))
            throw ValidationError("type " + s.type_key + ": expected " + std::to_string(s.count) +
                                  " detections, got 0");

    // Canonical order: single bricks first, then submodules; within a kind by
    // type key, then by projected keypoint. This fixes the processing and RNG
    // consumption order regardless of how detections arrived.
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        const bool sa = a.spec->component.is_submodule();
        const bool sb = b.spec->component.is_submodule();
        const std::int32_t ma = a.det->mask.empty() ? -1 : a.det->mask.front();
        const std::int32_t mb = b.det->mask.empty() ? -1 : b.det->mask.front();
        return std::tie(sa, a.result.type_key, a.det->keypoint.y, a.det->keypoint.x, ma) <
               std::tie(sb, b.result.type_key, b.det->keypoint.y, b.det->keypoint.x, mb);
    });

    for (Item& item : items) {
        if (!item.spec->component.is_submodule() && item.det->rotation_class) {
            item.rotations = {symmetry_decode(*item.det->rotation_class).canonical};
        } else if (opts.rotation_mode == InferOptions::RotationMode::RandomBaseline &&
                   item.spec->component.is_submodule()) {
            item.rotations = {Rotation{static_cast<int>(rotation_rng.uniform_index(4))}};
        } else {
            item.rotations = reduced_rotations(item.local.symmetry_order);
        }
    }

    VoxelWorld scratch = base;
    Raster scene = rasterize(cam, scratch);
    CandidateScorer scorer(cam, scene, scratch.next_instance_id());

    std::vector<MaskTarget> targets;
    targets.reserve(items.size());
    for (const Item& item : items)
        targets.push_back(make_target(*item.det, all_dets, cam.width, cam.height));

    const double tau = opts.tau_factor * cam.scale;
    const VoxelProjector proj(cam);
    std::optional<BaseConnectors> connectors;  // rebuilt only after the scratch world changes

    auto hypothesis_for = [&](std::size_t i) -> std::optional<PoseHypothesis> {
        if (!connectors) connectors = collect_base_connectors(scratch, cam, tau);
        HypothesisSearch search{&base.catalog(), &scratch, &cam,   &opts,
                                &*connectors,    &scorer,  &targets[i]};
        return search.best(*items[i].det, items[i].local, items[i].rotations);
    };

    const bool trace = std::getenv("BRICKPLAN_TRACE") != nullptr;
    auto accept = [&](std::size_t i, const PoseHypothesis& h) {
        Item& item = items[i];
        if (trace)
            std::fprintf(stderr, "accept %zu %s t=(%d,%d,%d) r=%d votes=%d iou=%.4f rep=%.6g ch=%d\n",
                         i, item.result.type_key.c_str(), h.pose.translation.x,
                         h.pose.translation.y, h.pose.translation.z, h.pose.rotation.quarter_turns,
                         h.votes, h.iou, h.reproj_error, h.keypoint_choice);
        const InstanceId id =
            scratch.place(item.spec->component, h.pose, item.result.type_key, false);
        rasterize_into(scene, proj, scratch.instance(id).world.voxels, id);
        connectors.reset();
        item.result.pose = h.pose;
        item.result.votes = h.votes;
        item.result.iou = h.iou;
        item.result.reproj_error = h.reproj_error;
        item.result.keypoint_choice = h.keypoint_choice;
        item.resolved = true;
    };

    // Exact fits first, looping so same-step supports unlock their dependents.
    // The gate deliberately requires both the silhouette and the keypoint to
    // match exactly: with shared supports still missing, a wrong pose can
    // already render an exact silhouette, and committing it would occlude and
    // derail everything scored after it.
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].resolved) continue;
            auto h = hypothesis_for(i);
            if (h && opts.verify_with_mask &&
                RankedHypothesis{*h}.exact(targets[i])) {
                accept(i, *h);
                progress = true;
            }
        }
    }
    // Remaining detections: repeatedly commit the most confident hypothesis.
    // For a single brick whose rotation the detection pins, the keypoint is
    // the rotation-invariant top-surface center, so a hypothesis reproducing
    // the detected keypoint bit-exactly can only be the detection's true
    // pose; those commit ahead of anything ranked by silhouette fit alone.
    // This matters for fully occluded detections, whose masks are empty:
    // their supports must land before some unrelated near-miss wins on IoU.
    // Submodules get no such priority — their keypoints under different
    // rotations can coincide in 3D, so an exact reprojection proves nothing.
    auto keypoint_exact = [&](std::size_t i, const PoseHypothesis& h) {
        return !items[i].spec->component.is_submodule() && items[i].det->rotation_class &&
               h.reproj_error == 0.0 && h.keypoint_choice == 0;
    };
    while (true) {
        std::size_t best_i = items.size();
        std::optional<PoseHypothesis> best_h;
        bool best_exact = false;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].resolved) continue;
            auto h = hypothesis_for(i);
            if (!h) continue;
            if (trace)
                std::fprintf(stderr, "  cand %zu %s t=(%d,%d,%d) r=%d votes=%d iou=%.4f rep=%.6g ch=%d\n",
                             i, items[i].result.type_key.c_str(), h->pose.translation.x,
                             h->pose.translation.y, h->pose.translation.z,
                             h->pose.rotation.quarter_turns, h->votes, h->iou, h->reproj_error,
                             h->keypoint_choice);
            const bool exact = keypoint_exact(i, *h);
            if (!best_h || (exact && !best_exact) ||
                (exact == best_exact &&
                 RankedHypothesis{*h}.better_than(RankedHypothesis{*best_h},
                                                  opts.verify_with_mask))) {
                best_h = h;
                best_i = i;
                best_exact = exact;
            }
        }
        if (!best_h) break;
        accept(best_i, *best_h);
    }

    StepInferenceResult out;
    out.success = true;
    for (Item& item : items) {
        if (!item.resolved) {
            item.result.error = "no_candidate";
            out.success = false;
        }
        out.detections.push_back(std::move(item.result));
    }
    return out;
}

Pose quantize_pose_baseline(const Vec3& raw_translation_units, const Catalog& catalog,
                            const Component& component, Rotation r, const VoxelWorld& base) {
    auto to_half = [](double v) { return static_cast<int>(std::llround(2.0 * v)); };
    const GridVec rounded{to_half(raw_translation_units.x), to_half(raw_translation_units.y),
                          to_half(raw_translation_units.z)};
    static constexpr int kDeltas[5] = {0, -1, 1, -2, 2};  // half-units: 0, ∓0.5, ∓1

    const ComponentGeom geom = rotated(resolve(catalog, component), r);
    bool found = false;
    GridVec best{};
    double best_dist = 0.0;
    for (int dx : kDeltas) {
        for (int dy : kDeltas) {
            for (int dz : kDeltas) {
                const GridVec t = rounded + GridVec{dx, dy, dz};
                if (!fits(base, geom, t)) continue;
                bool connected = false;
                for (const GridVec& v : geom.voxels)
                    if (v.y + t.y == 0) connected = true;
                if (!connected)
                    for (const GridVec& a : geom.anti_studs)
                        if (base.all_studs().count(a + t)) connected = true;
                if (!connected)
                    for (const GridVec& s : geom.studs)
                        if (base.all_anti_studs().count(s + t)) connected = true;
                if (!connected) continue;
                const double dist = std::sqrt(static_cast<double>(dx) * dx +
                                              static_cast<double>(dy) * dy +
                                              static_cast<double>(dz) * dz);
                if (!found || dist < best_dist) {
                    found = true;
                    best = t;
                    best_dist = dist;
                }
            }
        }
    }
    return Pose{found ? best : rounded, r};
}

std::optional<GridVec> craft_infer_translation(const Vec2& keypoint, const VoxelWorld& base,
                                               const CameraParams& cam) {
    const GridVec dims = base.dims();
    std::optional<GridVec> best;
    double best_dist = 0.0;
    auto block_empty = [&](int cx, int cy, int cz) {
        for (int dx = 0; dx < 2; ++dx)
            for (int dy = 0; dy < 2; ++dy)
                for (int dz = 0; dz < 2; ++dz)
                    if (base.occupied({2 * cx + dx, 2 * cy + dy, 2 * cz + dz})) return false;
        return true;
    };
    auto block_occupied = [&](int cx, int cy, int cz) {
        if (cx < 0 || cy < 0 || cz < 0 || 2 * cx >= dims.x || 2 * cy >= dims.y || 2 * cz >= dims.z)
            return false;
        return !block_empty(cx, cy, cz);
    };
    for (int cy = 0; 2 * cy + 1 < dims.y; ++cy) {
        for (int cz = 0; 2 * cz + 1 < dims.z; ++cz) {
            for (int cx = 0; 2 * cx + 1 < dims.x; ++cx) {
                if (!block_empty(cx, cy, cz)) continue;
                const bool valid = cy == 0 || block_occupied(cx - 1, cy, cz) ||
                                   block_occupied(cx + 1, cy, cz) ||
                                   block_occupied(cx, cy - 1, cz) ||
                                   block_occupied(cx, cy + 1, cz) ||
                                   block_occupied(cx, cy, cz - 1) ||
                                   block_occupied(cx, cy, cz + 1);
                if (!valid) continue;
                const Vec2 p = project(cam, {cx + 0.5, cy + 0.5, cz + 0.5});
                const double d = (p - keypoint).norm();
                const GridVec cell{cx, cy, cz};
                if (!best || d < best_dist || (d == best_dist && cell < *best)) {
                    best = cell;
                    best_dist = d;
                }
            }
        }
    }
    return best;
}

}  // namespace brickplan
