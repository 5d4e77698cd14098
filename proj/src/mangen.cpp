#include "brickplan/mangen.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>
#include <thread>

#include "brickplan/detector.hpp"
#include "brickplan/error.hpp"
#include "brickplan/image.hpp"
#include "brickplan/infer.hpp"
#include "brickplan/json_io.hpp"

namespace brickplan {

namespace {

void require_range(bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("gen config: ") + what);
}

// Unit-cell rectangle, half-open, within the world footprint.
struct Rect {
    int x0, z0, x1, z1;

    int width() const { return x1 - x0; }
    int depth() const { return z1 - z0; }
};

// True when some rotation maps the component's occupancy onto itself (up to a
// lattice shift) without mapping its connector sets the same way. Renders show
// occupancy only, so two such poses produce identical pixels in every camera
// while connecting differently; no observer could recover the right one. The
// generator refuses to create such submodules.
bool rotation_hides_connectors(const Catalog& catalog, const Component& c) {
    const ComponentGeom g = resolve(catalog, c);
    auto anchored = [](const ComponentGeom& geom) {
        const GridVec m = geom.bbox.min;
        auto shifted = [&m](std::vector<GridVec> v) {
            for (GridVec& p : v) p = p - m;
            std::sort(v.begin(), v.end());
            return v;
        };
        return std::array<std::vector<GridVec>, 3>{shifted(geom.voxels), shifted(geom.studs),
                                                   shifted(geom.anti_studs)};
    };
    const auto base = anchored(g);
    for (int q = 1; q < 4; ++q) {
        const auto rot = anchored(rotated(g, Rotation{q}));
        if (rot[0] == base[0] && (rot[1] != base[1] || rot[2] != base[2])) return true;
    }
    return false;
}

// Forward-stage construction state. Keeps a column height map so drop
// placement is cheap, and owns the submodule registry grown along the way.
class Builder {
  public:
    Builder(const GenConfig& cfg, const Catalog& catalog, VoxelWorld& world, Rng& rng,
            std::map<std::string, Component>& registry)
        : cfg_(cfg), catalog_(catalog), world_(world), rng_(rng), registry_(registry),
          ids_(catalog.ids()),
          heights_(static_cast<std::size_t>(world.dims().x) * world.dims().z, 0) {}

    // Drops the component at the unit cell (cx, cz): it lands on the highest
    // column under its footprint. Fails when it would leave the rect, exceed
    // the height cap, collide, or end up unconnected.
    bool try_drop(const Component& comp, const std::string& key, Rotation r, int cx, int cz,
                  const Rect& rect, int max_height_units) {
        const ComponentGeom geom = rotated(resolve(catalog_, comp), r);
        const int ex = geom.bbox.max.x - geom.bbox.min.x;  // half-units, even
        const int ez = geom.bbox.max.z - geom.bbox.min.z;
        const int ey = geom.bbox.max.y - geom.bbox.min.y;
        if (cx + ex / 2 > rect.x1 || cz + ez / 2 > rect.z1) return false;
        const int tx = 2 * cx - geom.bbox.min.x;
        const int tz = 2 * cz - geom.bbox.min.z;
        int land = 0;
        for (int x = 2 * cx; x < 2 * cx + ex; ++x)
            for (int z = 2 * cz; z < 2 * cz + ez; ++z) land = std::max(land, height_at(x, z));
        if (land + ey > 2 * max_height_units) return false;
        const Pose pose{GridVec{tx, land - geom.bbox.min.y, tz}, r};
        if (!world_.can_place(comp, pose)) return false;
        const InstanceId id = world_.place(comp, pose, key);
        for (const GridVec& v : world_.instance(id).world.voxels) raise(v.x, v.z, v.y + 1);
        return true;
    }

    bool add_single(int cx, int cz, const Rect& rect, int max_h) {
        const BrickTypeId id = ids_[rng_.uniform_index(ids_.size())];
        const Rotation r{static_cast<int>(rng_.uniform_index(4))};
        return try_drop(Component::brick(id), id, r, cx, cz, rect, max_h);
    }

    bool add_tower(int cx, int cz, const Rect& rect, int max_h) {
        const BrickTypeId id = ids_[rng_.uniform_index(ids_.size())];
        const Rotation r{static_cast<int>(rng_.uniform_index(4))};
        const int count = static_cast<int>(rng_.uniform_index(3)) + 2;  // 2..4 repeats
        int placed = 0;
        for (int i = 0; i < count; ++i) {
            if (!try_drop(Component::brick(id), id, r, cx, cz, rect, max_h)) break;
            ++placed;
        }
        return placed > 0;
    }

    bool add_submodule(int cx, int cz, const Rect& rect, int max_h) {
        std::string key;
        if (!registry_.empty() && rng_.uniform() < cfg_.submodule_reuse_prob) {
            auto it = registry_.begin();
            std::advance(it, rng_.uniform_index(registry_.size()));
            key = it->first;
        } else {
            auto built = build_submodule();
            if (!built) return false;
            key = "sub_" + std::to_string(next_submodule_id_++);
            registry_.emplace(key, std::move(*built));
        }
        const Rotation r{static_cast<int>(rng_.uniform_index(4))};
        return try_drop(registry_.at(key), key, r, cx, cz, rect, max_h);
    }

    bool add_by_strategy(int cx, int cz, const Rect& rect, int max_h) {
        switch (rng_.weighted_choice({cfg_.w_single, cfg_.w_submodule, cfg_.w_tower})) {
            case 0: return add_single(cx, cz, rect, max_h);
            case 1: return add_submodule(cx, cz, rect, max_h);
            default: return add_tower(cx, cz, rect, max_h);
        }
    }

  private:
    int height_at(int x, int z) const {
        return heights_[static_cast<std::size_t>(x) * world_.dims().z + z];
    }
    void raise(int x, int z, int top) {
        auto& h = heights_[static_cast<std::size_t>(x) * world_.dims().z + z];
        h = std::max(h, top);
    }

    // Builds a fresh submodule by stacking primitives inside a small box in a
    // scratch world, then re-expresses the parts in a canonical local frame
    // (bounding-box minimum at the origin).
    std::optional<Component> build_submodule() {
        const GridVec scratch_dims{24, 24, 24};
        VoxelWorld scratch(catalog_, scratch_dims);
        Builder inner(cfg_, catalog_, scratch, rng_, registry_);
        const Rect box{0, 0, static_cast<int>(rng_.uniform_index(3)) + 2,
                       static_cast<int>(rng_.uniform_index(3)) + 2};  // 2..4 x 2..4 units
        const int parts_target =
            2 + static_cast<int>(rng_.uniform_index(std::max(1, cfg_.max_submodule_parts - 1)));
        const int max_h = scratch_dims.y / 2;
        int placed = 0;
        for (int attempt = 0; attempt < cfg_.attempt_budget && placed < parts_target; ++attempt) {
            const int cx = static_cast<int>(rng_.uniform_index(box.width()));
            const int cz = static_cast<int>(rng_.uniform_index(box.depth()));
            if (inner.add_single(cx, cz, box, max_h)) ++placed;
        }
        if (placed < 2) return std::nullopt;
        GridVec shift{0, 0, 0};
        bool first = true;
        for (const auto& [id, inst] : scratch.instances())
            for (const GridVec& v : inst.world.voxels) {
                if (first || v.x < shift.x) shift.x = v.x;
                if (first || v.y < shift.y) shift.y = v.y;
                if (first || v.z < shift.z) shift.z = v.z;
                first = false;
            }
        std::vector<ComponentPart> parts;
        for (const auto& [id, inst] : scratch.instances())
            parts.push_back({inst.label, Pose{inst.pose.translation - shift, inst.pose.rotation}});
        Component c = Component::submodule(std::move(parts));
        if (rotation_hides_connectors(catalog_, c)) return std::nullopt;
        return c;
    }

    const GenConfig& cfg_;
    const Catalog& catalog_;
    VoxelWorld& world_;
    Rng& rng_;
    std::map<std::string, Component>& registry_;
    std::vector<BrickTypeId> ids_;
    std::vector<int> heights_;  // per (x, z) voxel column: one past the top
    int next_submodule_id_ = 0;
};

// Randomly partitions the footprint into boxes by recursive straight cuts.
std::vector<Rect> partition_footprint(Rng& rng, const Rect& root) {
    std::vector<Rect> leaves;
    std::vector<Rect> queue{root};
    while (!queue.empty()) {
        const Rect r = queue.back();
        queue.pop_back();
        const int w = r.width(), d = r.depth();
        const bool splittable = std::max(w, d) >= 4;
        if (!splittable || rng.uniform() >= 0.7) {
            leaves.push_back(r);
            continue;
        }
        if (w >= d) {
            const int cut = r.x0 + 2 + static_cast<int>(rng.uniform_index(w - 3));
            queue.push_back({cut, r.z0, r.x1, r.z1});
            queue.push_back({r.x0, r.z0, cut, r.z1});
        } else {
            const int cut = r.z0 + 2 + static_cast<int>(rng.uniform_index(d - 3));
            queue.push_back({r.x0, cut, r.x1, r.z1});
            queue.push_back({r.x0, r.z0, r.x1, cut});
        }
    }
    return leaves;
}

void fill_box(Builder& b, Rng& rng, const Rect& box, int max_h, int budget) {
    for (int attempt = 0; attempt < budget; ++attempt) {
        const int cx = box.x0 + static_cast<int>(rng.uniform_index(box.width()));
        const int cz = box.z0 + static_cast<int>(rng.uniform_index(box.depth()));
        b.add_by_strategy(cx, cz, box, max_h);
    }
}

void grow_edges(Builder& b, Rng& rng, const Rect& box, int max_h) {
    // Pick a nonempty subset of the four edges, then raise each of their
    // cells toward a per-cell target height with single primitives.
    bool use[4];
    bool any = false;
    for (bool& u : use) {
        u = rng.uniform() < 0.5;
        any = any || u;
    }
    if (!any) use[rng.uniform_index(4)] = true;

    std::vector<std::pair<int, int>> cells;
    auto add_edge = [&](int which) {
        if (!use[which]) return;
        if (which == 0)
            for (int x = box.x0; x < box.x1; ++x) cells.emplace_back(x, box.z0);
        if (which == 1)
            for (int x = box.x0; x < box.x1; ++x) cells.emplace_back(x, box.z1 - 1);
        if (which == 2)
            for (int z = box.z0; z < box.z1; ++z) cells.emplace_back(box.x0, z);
        if (which == 3)
            for (int z = box.z0; z < box.z1; ++z) cells.emplace_back(box.x1 - 1, z);
    };
    for (int i = 0; i < 4; ++i) add_edge(i);

    for (const auto& [cx, cz] : cells) {
        const int target = 1 + static_cast<int>(rng.uniform_index(max_h));
        for (int tries = 0; tries < 8; ++tries)
            if (!b.add_single(cx, cz, box, std::min(max_h, target))) break;
    }
}

// Chunk assembly for the backward stage: removes up to the configured limits
// from `work`, preferring the topmost candidate first and then spatial
// proximity, recomputing removability after every removal.
std::vector<Instance> take_chunk(VoxelWorld& work, const GenConfig& cfg,
                                 const CameraParams& camera, bool& relaxed,
                                 const std::set<InstanceId>& banned) {
    std::vector<Instance> chunk;
    std::set<std::string> types;
    double cxs = 0, cys = 0, czs = 0;  // running centroid of chunk bbox centers

    // A submodule's orientation is recovered from its pixels alone (unlike
    // primitives, whose observation carries a rotation class), so keep a
    // submodule out of a step in which the step image would not show it.
    // Two pixels of margin so an exact-depth tie flipping one pixel cannot
    // leave the observation empty.
    std::set<InstanceId> camera_visible;
    {
        const Raster raster = rasterize(camera, work);
        std::map<InstanceId, int> px;
        for (InstanceId id : raster.ids)
            if (id >= 0) ++px[id];
        for (const auto& [id, n] : px)
            if (n >= 2) camera_visible.insert(id);
    }
    auto hidden_submodule = [&](InstanceId id) {
        const Instance& inst = work.instance(id);
        return inst.component.is_submodule() && !camera_visible.count(id);
    };
    auto is_banned = [&](InstanceId id) { return banned.count(id) > 0; };

    while (static_cast<int>(chunk.size()) < cfg.max_chunk_instances) {
        std::vector<InstanceId> cands = work.removable_visible(cfg.visibility_threshold);
        std::erase_if(cands, hidden_submodule);
        std::erase_if(cands, is_banned);
        if (cands.empty() && chunk.empty()) {
            cands = work.removable_all();
            std::erase_if(cands, hidden_submodule);
            std::erase_if(cands, is_banned);
            if (cands.empty()) {
                cands = work.removable_all();
                std::erase_if(cands, is_banned);
            }
            // Last resort so decomposition cannot deadlock; such a step's
            // submodule rotation may be unrecoverable from the image.
            if (cands.empty()) cands = work.removable_all();
            if (!cands.empty()) relaxed = true;
        }
        InstanceId best = -1;
        double best_key = 0;
        GridVec best_tie{0, 0, 0};
        for (InstanceId id : cands) {
            const Instance& inst = work.instance(id);
            if (!types.count(inst.label) &&
                static_cast<int>(types.size()) >= cfg.max_chunk_types)
                continue;
            const Bounds& bb = inst.world.bbox;
            double key;
            GridVec tie{bb.min.x, bb.min.z, id};
            if (chunk.empty()) {
                key = -bb.max.y;  // topmost first
            } else {
                const double dx = 0.5 * (bb.min.x + bb.max.x) - cxs / chunk.size();
                const double dy = 0.5 * (bb.min.y + bb.max.y) - cys / chunk.size();
                const double dz = 0.5 * (bb.min.z + bb.max.z) - czs / chunk.size();
                key = dx * dx + dy * dy + dz * dz;  // nearest to the chunk
                tie = {id, 0, 0};
            }
            if (best < 0 || key < best_key || (key == best_key && tie < best_tie)) {
                best = id;
                best_key = key;
                best_tie = tie;
            }
        }
        if (best < 0) break;
        const Instance& inst = work.instance(best);
        types.insert(inst.label);
        const Bounds& bb = inst.world.bbox;
        cxs += 0.5 * (bb.min.x + bb.max.x);
        cys += 0.5 * (bb.min.y + bb.max.y);
        czs += 0.5 * (bb.min.z + bb.max.z);
        chunk.push_back(inst);
        work.remove(best);
    }
    return chunk;
}

// A manual step must be an unambiguous instruction: solving the step's own
// observation has to reproduce the added placements exactly, compared as
// posed occupancy plus connector sets (the physical state, indifferent to
// how a symmetric shape's pose is written). Partial occlusion can otherwise
// leave several pixel-identical readings of a submodule pose.
bool step_round_trips(const VoxelWorld& base, const std::vector<PlannedComponent>& additions,
                      const CameraParams& camera, std::set<std::string>& bad_types) {
    using Signature = std::array<std::vector<GridVec>, 3>;
    auto signature = [&](const Component& c, const Pose& p) {
        PosedGeom g = base.posed(c, p);
        std::sort(g.voxels.begin(), g.voxels.end());
        std::sort(g.studs.begin(), g.studs.end());
        std::sort(g.anti_studs.begin(), g.anti_studs.end());
        return Signature{std::move(g.voxels), std::move(g.studs), std::move(g.anti_studs)};
    };

    std::vector<StepAddition> adds;
    adds.reserve(additions.size());
    std::map<std::string, ComponentSpec> by_key;
    std::map<std::string, std::multiset<Signature>> expected;
    for (const PlannedComponent& a : additions) {
        adds.push_back({a.type_key, a.component, a.pose});
        auto [it, fresh] = by_key.try_emplace(a.type_key, ComponentSpec{a.type_key, a.component, 0});
        ++it->second.count;
        expected[a.type_key].insert(signature(a.component, a.pose));
    }
    const StepObservation obs = oracle_detect(base, adds, camera);
    std::vector<ComponentSpec> specs;
    specs.reserve(by_key.size());
    for (const auto& [key, spec] : by_key) specs.push_back(spec);
    const StepInferenceResult res = infer_step(obs, specs, base, camera, {});

    bad_types.clear();
    for (const DetectionResult& d : res.detections) {
        if (!d.pose) {
            bad_types.insert(d.type_key);
            continue;
        }
        auto& want = expected.at(d.type_key);
        const auto it = want.find(signature(by_key.at(d.type_key).component, *d.pose));
        if (it == want.end())
            bad_types.insert(d.type_key);
        else
            want.erase(it);
    }
    return bad_types.empty();
}

std::vector<StepSpec> decompose_steps(const VoxelWorld& final_world, const GenConfig& cfg,
                                      const CameraParams& camera) {
    constexpr int kStepRetryLimit = 5;
    VoxelWorld work = final_world;
    std::vector<StepSpec> reversed;
    while (work.instance_count() > 0) {
        std::set<InstanceId> banned;  // instances deferred to a later step
        for (int attempt = 0;; ++attempt) {
            bool relaxed = false;
            VoxelWorld trial = work;
            const std::vector<Instance> chunk = take_chunk(trial, cfg, camera, relaxed, banned);
            if (chunk.empty())
                throw Error("internal", "decomposition stalled with instances remaining");
            StepSpec step;
            step.camera = camera;
            step.relaxed_visibility = relaxed;
            // Removal order is top-down; replay order is its reverse.
            for (auto it = chunk.rbegin(); it != chunk.rend(); ++it)
                step.additions.push_back({it->label, it->component, it->pose});
            std::set<std::string> bad_types;
            const bool ok = step_round_trips(trial, step.additions, camera, bad_types);
            if (!ok && attempt < kStepRetryLimit) {
                // Defer the offending instances: a later step has less of the
                // model left to hide behind.
                for (const Instance& inst : chunk)
                    if (bad_types.count(inst.label)) banned.insert(inst.id);
                continue;
            }
            if (!ok) step.relaxed_visibility = true;
            work = std::move(trial);
            reversed.push_back(std::move(step));
            break;
        }
    }
    std::reverse(reversed.begin(), reversed.end());
    return reversed;
}

int even_floor(int v) { return v & ~1; }

}  // namespace

void GenConfig::validate() const {
    require_range(world_dims.x > 0 && world_dims.y > 0 && world_dims.z > 0,
                  "world dims must be positive");
    require_range(min_length >= 1 && min_length <= max_length, "length range is empty");
    require_range(min_width >= 1 && min_width <= max_width, "width range is empty");
    require_range(min_height >= 1 && min_height <= max_height, "height range is empty");
    require_range(2 * max_length <= world_dims.x && 2 * max_width <= world_dims.z &&
                      2 * max_height <= world_dims.y,
                  "bounding box exceeds world dims");
    require_range(w_single >= 0 && w_submodule >= 0 && w_tower >= 0 &&
                      w_single + w_submodule + w_tower > 0,
                  "strategy weights must be nonnegative and not all zero");
    require_range(edge_grow_prob >= 0 && edge_grow_prob <= 1, "edge_grow_prob outside [0, 1]");
    require_range(submodule_reuse_prob >= 0 && submodule_reuse_prob <= 1,
                  "submodule_reuse_prob outside [0, 1]");
    require_range(max_submodule_parts >= 2, "max_submodule_parts must be at least 2");
    require_range(submodule_depth >= 1, "submodule_depth must be at least 1");
    require_range(attempt_budget >= 1, "attempt_budget must be positive");
    require_range(max_chunk_instances >= 1, "max_chunk_instances must be positive");
    require_range(max_chunk_types >= 1, "max_chunk_types must be positive");
    require_range(visibility_threshold >= 0, "visibility_threshold must be nonnegative");
    require_range(min_scale > 0 && min_scale <= max_scale, "scale range is empty");
    require_range(roll_jitter >= 0 && yaw_jitter >= 0 && pitch_jitter >= 0,
                  "jitter must be nonnegative");
    require_range(image_width > 0 && image_height > 0, "image size must be positive");
    require_range(frame_margin_px >= 0 && 2 * frame_margin_px < image_width &&
                      2 * frame_margin_px < image_height,
                  "frame margin leaves no usable image");
}

int AssemblyPlan::total_steps() const {
    int n = static_cast<int>(steps.size());
    for (const SubmoduleDef& def : submodules) n += static_cast<int>(def.steps.size());
    return n;
}

BuildResult forward_build(const GenConfig& cfg, const Catalog& catalog) {
    cfg.validate();
    if (catalog.ids().empty()) throw ValidationError("catalog is empty");
    Rng rng = Rng::substream(cfg.seed, "forward");

    BuildResult out{VoxelWorld(catalog, cfg.world_dims), {}};
    Builder builder(cfg, catalog, out.world, rng, out.submodules);

    const int length = cfg.min_length + static_cast<int>(rng.uniform_index(
                                            cfg.max_length - cfg.min_length + 1));
    const int width = cfg.min_width + static_cast<int>(rng.uniform_index(
                                          cfg.max_width - cfg.min_width + 1));
    const int height = cfg.min_height + static_cast<int>(rng.uniform_index(
                                            cfg.max_height - cfg.min_height + 1));
    const int sx = (cfg.world_dims.x / 2 - length) / 2;  // centered, unit cells
    const int sz = (cfg.world_dims.z / 2 - width) / 2;
    const Rect footprint{sx, sz, sx + length, sz + width};

    for (const Rect& box : partition_footprint(rng, footprint)) {
        if (rng.uniform() < cfg.edge_grow_prob) grow_edges(builder, rng, box, height);
        fill_box(builder, rng, box, height, cfg.attempt_budget);
    }
    if (out.world.instance_count() == 0)
        throw GenerationExhausted(cfg.seed, "no component could be placed within the budget");
    // Drop registry entries that never made it into the world.
    std::set<std::string> used;
    for (const auto& [id, inst] : out.world.instances()) used.insert(inst.label);
    for (auto it = out.submodules.begin(); it != out.submodules.end();)
        it = used.count(it->first) ? std::next(it) : out.submodules.erase(it);
    return out;
}

CameraParams sample_camera(const GenConfig& cfg, const Bounds& content, Rng& rng) {
    CameraParams cam;
    cam.width = cfg.image_width;
    cam.height = cfg.image_height;
    cam.euler_deg = {cfg.base_roll + rng.uniform(-cfg.roll_jitter, cfg.roll_jitter),
                     cfg.base_yaw + rng.uniform(-cfg.yaw_jitter, cfg.yaw_jitter),
                     cfg.base_pitch + rng.uniform(-cfg.pitch_jitter, cfg.pitch_jitter)};
    cam.scale = rng.uniform(cfg.min_scale, cfg.max_scale);
    cam.t = {0, 0};

    // Projected extent of the content box at unit scale.
    const Mat3 r = rotation_matrix(cam);
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (int i = 0; i < 8; ++i) {
        const Vec3 corner{(i & 1 ? content.max.x : content.min.x) * 0.5,
                          (i & 2 ? content.max.y : content.min.y) * 0.5,
                          (i & 4 ? content.max.z : content.min.z) * 0.5};
        const Vec3 p = r.apply(corner);
        umin = std::min(umin, p.x);
        umax = std::max(umax, p.x);
        vmin = std::min(vmin, p.y);
        vmax = std::max(vmax, p.y);
    }
    const double span_u = cfg.image_width - 2.0 * cfg.frame_margin_px;
    const double span_v = cfg.image_height - 2.0 * cfg.frame_margin_px;
    const double extent_u = std::max(umax - umin, 1e-9);
    const double extent_v = std::max(vmax - vmin, 1e-9);
    // Shrink the sampled scale when the shape would not fit in frame.
    cam.scale = std::min(cam.scale, std::min(span_u / extent_u, span_v / extent_v));

    // Translation jitter: a draw in [-1, 1]^2 mapped onto the interval that
    // keeps the whole shape inside the margins.
    const double jx = rng.uniform(-1.0, 1.0);
    const double jy = rng.uniform(-1.0, 1.0);
    const double lo_x = cfg.frame_margin_px - cam.scale * umin;
    const double hi_x = cfg.image_width - cfg.frame_margin_px - cam.scale * umax;
    const double lo_y = cfg.frame_margin_px - cam.scale * vmin;
    const double hi_y = cfg.image_height - cfg.frame_margin_px - cam.scale * vmax;
    cam.t = {lo_x + (jx + 1.0) * 0.5 * (hi_x - lo_x), lo_y + (jy + 1.0) * 0.5 * (hi_y - lo_y)};
    return cam;
}

AssemblyPlan backward_decompose(const VoxelWorld& final_world, const GenConfig& cfg,
                                const CameraParams& camera,
                                const std::map<std::string, Component>& submodules) {
    cfg.validate();
    AssemblyPlan plan;
    plan.world_dims = final_world.dims();
    plan.camera = camera;
    plan.steps = decompose_steps(final_world, cfg, camera);

    // Every submodule type used by the root assembly gets its own subtree:
    // the flattened parts are rebuilt at a canonical pose and decomposed the
    // same way the root shape was.
    std::set<std::string> used;
    for (const StepSpec& step : plan.steps)
        for (const PlannedComponent& a : step.additions)
            if (submodules.count(a.type_key)) used.insert(a.type_key);
    for (const std::string& key : used) {
        const Component& comp = submodules.at(key);
        const ComponentGeom geom = resolve(final_world.catalog(), comp);
        const GridVec t0{even_floor((final_world.dims().x - (geom.bbox.max.x - geom.bbox.min.x)) / 2),
                         0,
                         even_floor((final_world.dims().z - (geom.bbox.max.z - geom.bbox.min.z)) / 2)};
        VoxelWorld sub_world(final_world.catalog(), final_world.dims());
        for (const ComponentPart& part : comp.parts)
            sub_world.place(Component::brick(part.type),
                            Pose{part.pose.translation + t0, part.pose.rotation}, part.type);
        SubmoduleDef def;
        def.key = key;
        def.component = comp;
        def.steps = decompose_steps(sub_world, cfg, camera);
        plan.submodules.push_back(std::move(def));
    }
    return plan;
}

VoxelWorld replay_plan(const AssemblyPlan& plan, const Catalog& catalog) {
    VoxelWorld world(catalog, plan.world_dims);
    for (const StepSpec& step : plan.steps)
        for (const PlannedComponent& a : step.additions) world.place(a.component, a.pose, a.type_key);
    return world;
}

namespace {

namespace fs = std::filesystem;

// Walks every step of the plan in tree order (submodule subtrees first, then
// the root), giving the callback the pre-step world and the step itself.
template <typename F>
void walk_plan(AssemblyPlan& plan, const Catalog& catalog, F&& per_step) {
    int index = 0;
    auto run_sequence = [&](std::vector<StepSpec>& steps) {
        VoxelWorld world(catalog, plan.world_dims);
        for (StepSpec& step : steps) {
            step.image_index = index++;
            per_step(world, step);
            for (const PlannedComponent& a : step.additions)
                world.place(a.component, a.pose, a.type_key);
        }
    };
    for (SubmoduleDef& def : plan.submodules) run_sequence(def.steps);
    run_sequence(plan.steps);
}

void emit_set(const GenConfig& cfg, const Catalog& catalog, const fs::path& set_dir,
              SetResult& result) {
    BuildResult built = forward_build(cfg, catalog);
    Rng cam_rng = Rng::substream(cfg.seed, "camera");
    const CameraParams camera = sample_camera(cfg, built.world.content_bounds(), cam_rng);
    AssemblyPlan plan = backward_decompose(built.world, cfg, camera, built.submodules);

    fs::create_directories(set_dir / "steps");

    walk_plan(plan, catalog, [&](VoxelWorld& base, StepSpec& step) {
        std::vector<StepAddition> additions;
        for (const PlannedComponent& a : step.additions)
            additions.push_back({a.type_key, a.component, a.pose});
        const StepObservation obs = oracle_detect(base, additions, camera);
        write_json_file((set_dir / "steps" / (std::to_string(step.image_index) + ".obs.json")).string(),
                        observation_to_json(obs));

        // Render the post-step shape with the new components highlighted.
        VoxelWorld after = base;
        std::vector<InstanceId> fresh;
        for (const PlannedComponent& a : step.additions)
            fresh.push_back(after.place(a.component, a.pose, a.type_key));
        write_png_rgb8((set_dir / "steps" / (std::to_string(step.image_index) + ".png")).string(),
                       render_manual(camera, after, fresh));
    });

    write_json_file((set_dir / "plan.json").string(), plan_to_json(plan, built.submodules));
    write_json_file((set_dir / "camera.json").string(), camera_to_json(camera));
    write_json_file((set_dir / "world.json").string(), world_to_json(built.world, built.submodules));

    // Round-trip guard: the plan must rebuild the forward result exactly.
    if (!replay_plan(plan, catalog).same_cells(built.world))
        throw Error("internal", "plan replay does not reproduce the built shape");

    result.steps = plan.total_steps();
    result.instances = static_cast<int>(built.world.instance_count());
}

}  // namespace

DatasetResult emit_dataset(const GenConfig& cfg, int n_sets, const Catalog& catalog,
                           const std::string& out_dir, int jobs) {
    cfg.validate();
    if (n_sets < 0) throw ValidationError("n_sets must be nonnegative");
    if (jobs < 1) jobs = 1;
    fs::create_directories(out_dir);

    DatasetResult out;
    out.sets.resize(n_sets);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int k = next.fetch_add(1); k < n_sets; k = next.fetch_add(1)) {
            SetResult& r = out.sets[k];
            r.name = "set_" + std::to_string(k);
            r.seed = Rng::derive_seed(cfg.seed, r.name);
            GenConfig set_cfg = cfg;
            set_cfg.seed = r.seed;
            try {
                emit_set(set_cfg, catalog, fs::path(out_dir) / r.name, r);
            } catch (const std::exception& e) {
                r.error = e.what();
            }
        }
    };
    if (jobs == 1 || n_sets <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < std::min(jobs, n_sets); ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    nlohmann::json sets = nlohmann::json::array();
    for (const SetResult& r : out.sets) {
        nlohmann::json e = {{"name", r.name},
                            {"seed", r.seed},
                            {"steps", r.steps},
                            {"instances", r.instances}};
        if (!r.error.empty()) e["error"] = r.error;
        sets.push_back(std::move(e));
    }
    const nlohmann::json manifest = {{"schema", 1},
                                     {"seed", cfg.seed},
                                     {"config", gen_config_to_json(cfg)},
                                     {"sets", std::move(sets)}};
    out.manifest_path = (fs::path(out_dir) / "manifest.json").string();
    write_json_file(out.manifest_path, manifest);
    return out;
}

}  // namespace brickplan
