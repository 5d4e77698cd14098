#include "brickplan/world.hpp"

#include <algorithm>
#include <deque>
#include <unordered_set>

#include "brickplan/error.hpp"

namespace brickplan {

VoxelWorld::VoxelWorld(const Catalog& catalog, GridVec dims) : catalog_(&catalog), dims_(dims) {
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
        throw ValidationError("world dimensions must be positive");
    grid_.assign(static_cast<std::size_t>(dims.x) * dims.y * dims.z, -1);
}

std::size_t VoxelWorld::index_of(const GridVec& cell) const {
    return (static_cast<std::size_t>(cell.y) * dims_.z + cell.z) * dims_.x + cell.x;
}

bool VoxelWorld::in_bounds_cell(const GridVec& cell) const {
    return cell.x >= 0 && cell.y >= 0 && cell.z >= 0 && cell.x < dims_.x && cell.y < dims_.y &&
           cell.z < dims_.z;
}

InstanceId VoxelWorld::cell_owner(const GridVec& cell) const {
    if (!in_bounds_cell(cell)) return -1;
    return grid_[index_of(cell)];
}

void VoxelWorld::check_pose_lattice(const Pose& pose) const {
    if (pose.rotation.quarter_turns < 0 || pose.rotation.quarter_turns > 3)
        throw ValidationError("rotation must be 0..3 quarter turns");
}

PosedGeom VoxelWorld::posed(const Component& component, const Pose& pose) const {
    check_pose_lattice(pose);
    ComponentGeom local = rotated(resolve(*catalog_, component), pose.rotation);
    PosedGeom g;
    g.voxels.reserve(local.voxels.size());
    for (const GridVec& v : local.voxels) g.voxels.push_back(v + pose.translation);
    for (const GridVec& s : local.studs) g.studs.push_back(s + pose.translation);
    for (const GridVec& a : local.anti_studs) g.anti_studs.push_back(a + pose.translation);
    return g;
}

std::vector<GridVec> VoxelWorld::anti_studs_of_component(const Component& component,
                                                         const Pose& pose) const {
    return posed(component, pose).anti_studs;
}

bool VoxelWorld::connected_at(const PosedGeom& g) const {
    for (const GridVec& v : g.voxels)
        if (v.y == 0) return true;  // resting on the ground plane
    for (const GridVec& a : g.anti_studs)
        if (stud_at_.count(a)) return true;
    for (const GridVec& s : g.studs)
        if (anti_at_.count(s)) return true;
    return false;
}

bool VoxelWorld::can_place(const Component& component, const Pose& pose,
                           bool require_connection) const {
    PosedGeom g = posed(component, pose);
    for (const GridVec& v : g.voxels) {
        if (!in_bounds_cell(v)) return false;
        if (grid_[index_of(v)] >= 0) return false;
    }
    return !require_connection || connected_at(g);
}

InstanceId VoxelWorld::place(const Component& component, const Pose& pose,
                             const std::string& label, bool require_connection) {
    PosedGeom g = posed(component, pose);
    for (const GridVec& v : g.voxels)
        if (!in_bounds_cell(v))
            throw PlacementError(PlacementError::Reason::OutOfBounds,
                                 "placement extends outside the world grid");
    for (const GridVec& v : g.voxels)
        if (grid_[index_of(v)] >= 0)
            throw PlacementError(PlacementError::Reason::Collision,
                                 "placement overlaps instance " +
                                     std::to_string(grid_[index_of(v)]));
    if (require_connection && !connected_at(g))
        throw PlacementError(PlacementError::Reason::Floating,
                             "placement has no stud mate and does not rest on the ground");

    const InstanceId id = next_id_++;
    Instance inst;
    inst.id = id;
    inst.component = component;
    inst.pose = pose;
    inst.label = label;
    inst.world.voxels = g.voxels;
    inst.world.studs = g.studs;
    inst.world.anti_studs = g.anti_studs;
    inst.world.bbox = bounds_of(g.voxels);
    for (const GridVec& v : g.voxels) grid_[index_of(v)] = id;
    for (const GridVec& s : g.studs) stud_at_.emplace(s, id);
    for (const GridVec& a : g.anti_studs) anti_at_.emplace(a, id);
    instances_.emplace(id, std::move(inst));
    return id;
}

void VoxelWorld::remove(InstanceId id) {
    auto it = instances_.find(id);
    if (it == instances_.end())
        throw ValidationError("remove: no instance with id " + std::to_string(id));
    const Instance& inst = it->second;
    for (const GridVec& v : inst.world.voxels) grid_[index_of(v)] = -1;
    for (const GridVec& s : inst.world.studs) stud_at_.erase(s);
    for (const GridVec& a : inst.world.anti_studs) anti_at_.erase(a);
    instances_.erase(it);
}

const Instance& VoxelWorld::instance(InstanceId id) const {
    auto it = instances_.find(id);
    if (it == instances_.end())
        throw ValidationError("no instance with id " + std::to_string(id));
    return it->second;
}

std::vector<GridVec> VoxelWorld::occupied_cells() const {
    std::vector<GridVec> out;
    for (const auto& [id, inst] : instances_)
        out.insert(out.end(), inst.world.voxels.begin(), inst.world.voxels.end());
    std::sort(out.begin(), out.end());
    return out;
}

Bounds VoxelWorld::content_bounds() const { return bounds_of(occupied_cells()); }

std::vector<StudPoint> VoxelWorld::studs_of() const {
    // A stud at (x, y, z) sits at the center of a unit cell top face; the
    // 2x2 voxel patch right above it spans [x-1, x+1) x [y, y+1) x [z-1, z+1).
    std::vector<StudPoint> out;
    for (const auto& [id, inst] : instances_) {
        for (const GridVec& s : inst.world.studs) {
            bool blocked = false;
            for (int dx = -1; dx <= 0 && !blocked; ++dx)
                for (int dz = -1; dz <= 0 && !blocked; ++dz)
                    blocked = occupied({s.x + dx, s.y, s.z + dz});
            if (!blocked) out.push_back({s, id});
        }
    }
    std::sort(out.begin(), out.end(), [](const StudPoint& a, const StudPoint& b) {
        return std::tie(a.position, a.owner) < std::tie(b.position, b.owner);
    });
    return out;
}

std::vector<StudPoint> VoxelWorld::anti_studs_of() const {
    std::vector<StudPoint> out;
    for (const auto& [id, inst] : instances_) {
        for (const GridVec& a : inst.world.anti_studs) {
            if (a.y == 0) continue;  // flush with the ground; nothing fits below
            bool blocked = false;
            for (int dx = -1; dx <= 0 && !blocked; ++dx)
                for (int dz = -1; dz <= 0 && !blocked; ++dz)
                    blocked = occupied({a.x + dx, a.y - 1, a.z + dz});
            if (!blocked) out.push_back({a, id});
        }
    }
    std::sort(out.begin(), out.end(), [](const StudPoint& a, const StudPoint& b) {
        return std::tie(a.position, a.owner) < std::tie(b.position, b.owner);
    });
    return out;
}

bool VoxelWorld::rests_on_ground(const Instance& inst) const {
    for (const GridVec& v : inst.world.voxels)
        if (v.y == 0) return true;
    return false;
}

std::vector<InstanceId> VoxelWorld::mates_of(InstanceId id) const {
    const Instance& inst = instance(id);
    std::unordered_set<InstanceId> seen;
    std::vector<InstanceId> out;
    auto add = [&](InstanceId other) {
        if (other != id && seen.insert(other).second) out.push_back(other);
    };
    for (const GridVec& s : inst.world.studs) {
        auto it = anti_at_.find(s);
        if (it != anti_at_.end()) add(it->second);
    }
    for (const GridVec& a : inst.world.anti_studs) {
        auto it = stud_at_.find(a);
        if (it != stud_at_.end()) add(it->second);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool VoxelWorld::removable(InstanceId id) const {
    if (!has_instance(id)) return false;
    if (instances_.size() == 1) return true;
    // BFS from grounded instances over the mating graph, skipping `id`.
    std::unordered_set<InstanceId> reached;
    std::deque<InstanceId> queue;
    for (const auto& [other, inst] : instances_) {
        if (other == id) continue;
        if (rests_on_ground(inst)) {
            reached.insert(other);
            queue.push_back(other);
        }
    }
    while (!queue.empty()) {
        InstanceId cur = queue.front();
        queue.pop_front();
        for (InstanceId m : mates_of(cur)) {
            if (m == id || reached.count(m)) continue;
            reached.insert(m);
            queue.push_back(m);
        }
    }
    return reached.size() == instances_.size() - 1;
}

namespace {

// Axis-aligned orthographic visibility at voxel resolution: one "pixel" per
// voxel column. This is a rasterization of the top-down view (rays along -y)
// and a side view at a quarter-turn yaw (rays along -x), used only for the
// removability heuristic so exact voxel alignment is preferable to a free
// camera.
struct AxisViews {
    // first-hit owner per (x, z) column and per (y, z) column
    std::vector<InstanceId> top;
    std::vector<InstanceId> side;
    GridVec dims;

    InstanceId& top_at(int x, int z) { return top[static_cast<std::size_t>(z) * dims.x + x]; }
    InstanceId& side_at(int y, int z) { return side[static_cast<std::size_t>(y) * dims.z + z]; }
};

AxisViews render_axis_views(const VoxelWorld& w) {
    AxisViews v;
    v.dims = w.dims();
    v.top.assign(static_cast<std::size_t>(v.dims.x) * v.dims.z, -1);
    v.side.assign(static_cast<std::size_t>(v.dims.y) * v.dims.z, -1);
    std::vector<int> top_height(v.top.size(), -1);
    std::vector<int> side_depth(v.side.size(), -1);
    for (const auto& [id, inst] : w.instances()) {
        for (const GridVec& c : inst.world.voxels) {
            std::size_t ti = static_cast<std::size_t>(c.z) * v.dims.x + c.x;
            if (c.y > top_height[ti]) {
                top_height[ti] = c.y;
                v.top[ti] = id;
            }
            std::size_t si = static_cast<std::size_t>(c.y) * v.dims.z + c.z;
            if (c.x > side_depth[si]) {
                side_depth[si] = c.x;
                v.side[si] = id;
            }
        }
    }
    return v;
}

}  // namespace

namespace {

// Silhouette: columns the instance occupies at all; visible: columns where it
// is the first hit. Both views pooled into one fraction.
double fraction_with_views(const Instance& inst, const GridVec& dims, const AxisViews& views) {
    std::unordered_set<std::size_t> top_cols, side_cols;
    for (const GridVec& c : inst.world.voxels) {
        top_cols.insert(static_cast<std::size_t>(c.z) * dims.x + c.x);
        side_cols.insert(static_cast<std::size_t>(c.y) * dims.z + c.z);
    }
    std::size_t silhouette = top_cols.size() + side_cols.size();
    if (silhouette == 0) return 0.0;
    std::size_t visible = 0;
    for (std::size_t i : top_cols)
        if (views.top[i] == inst.id) ++visible;
    for (std::size_t i : side_cols)
        if (views.side[i] == inst.id) ++visible;
    return static_cast<double>(visible) / static_cast<double>(silhouette);
}

}  // namespace

double VoxelWorld::visible_fraction(InstanceId id) const {
    return fraction_with_views(instance(id), dims_, render_axis_views(*this));
}

std::vector<InstanceId> VoxelWorld::removable_all() const {
    std::vector<InstanceId> out;
    for (const auto& [id, inst] : instances_)
        if (removable(id)) out.push_back(id);
    return out;
}

std::vector<InstanceId> VoxelWorld::removable_visible(double visibility_threshold) const {
    AxisViews views = render_axis_views(*this);
    std::vector<InstanceId> out;
    for (InstanceId id : removable_all())
        if (fraction_with_views(instance(id), dims_, views) > visibility_threshold)
            out.push_back(id);
    return out;
}

bool VoxelWorld::same_cells(const VoxelWorld& other) const {
    return dims_ == other.dims_ && occupied_cells() == other.occupied_cells();
}

}  // namespace brickplan
