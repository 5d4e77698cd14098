#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "brickplan/catalog.hpp"
#include "brickplan/geometry.hpp"

namespace brickplan {

using InstanceId = int;

// A component placed in a world, with its world-frame geometry cached.
struct Instance {
    InstanceId id = 0;
    Component component;
    Pose pose;
    std::string label;     // type key for grouping, coloring and observations
    ComponentGeom world;   // posed geometry (world coordinates, half-units)
};

struct PosedGeom {
    std::vector<GridVec> voxels;
    std::vector<GridVec> studs;
    std::vector<GridVec> anti_studs;
};

struct StudPoint {
    GridVec position;  // half-units
    InstanceId owner;
};

// Discrete assembly state on a fixed voxel grid (default 130^3 voxels, i.e.
// 65 grid units per side). Tracks per-cell occupancy, per-instance connector
// sets, and enforces the placement contract: in bounds, collision free and
// connected (a mated stud/anti-stud pair in either vertical direction, or
// resting on the ground plane, which acts as a universal connector).
class VoxelWorld {
  public:
    explicit VoxelWorld(const Catalog& catalog, GridVec dims = {130, 130, 130});

    const Catalog& catalog() const { return *catalog_; }
    const GridVec& dims() const { return dims_; }

    InstanceId place(const Component& component, const Pose& pose, const std::string& label,
                     bool require_connection = true);
    void remove(InstanceId id);

    bool can_place(const Component& component, const Pose& pose,
                   bool require_connection = true) const;

    // World-frame geometry a component would have at the given pose.
    PosedGeom posed(const Component& component, const Pose& pose) const;
    std::vector<GridVec> anti_studs_of_component(const Component& component,
                                                 const Pose& pose) const;

    std::size_t instance_count() const { return instances_.size(); }
    InstanceId next_instance_id() const { return next_id_; }  // ids are never reused
    const std::map<InstanceId, Instance>& instances() const { return instances_; }
    const Instance& instance(InstanceId id) const;
    bool has_instance(InstanceId id) const { return instances_.count(id) > 0; }

    // Occupancy queries. Cells outside the grid read as empty.
    InstanceId cell_owner(const GridVec& cell) const;  // -1 when empty
    bool occupied(const GridVec& cell) const { return cell_owner(cell) >= 0; }
    std::vector<GridVec> occupied_cells() const;
    Bounds content_bounds() const;  // bbox of all occupied cells

    // Available connectors: a stud is excluded when any voxel directly above
    // its cell-top patch is occupied; an anti-stud when any voxel directly
    // below is occupied or it sits at ground level.
    std::vector<StudPoint> studs_of() const;
    std::vector<StudPoint> anti_studs_of() const;

    // All connector points regardless of availability, keyed by position.
    const std::unordered_map<GridVec, InstanceId, GridVecHash>& all_studs() const { return stud_at_; }
    const std::unordered_map<GridVec, InstanceId, GridVecHash>& all_anti_studs() const { return anti_at_; }

    bool rests_on_ground(const Instance& inst) const;

    // Instance adjacency through mated connector pairs.
    std::vector<InstanceId> mates_of(InstanceId id) const;

    // True when removing `id` leaves every remaining instance connected to
    // the ground through the mating graph.
    bool removable(InstanceId id) const;

    // Removable instances whose pixel visibility from a top-down and a side
    // orthographic view exceeds the threshold; `fallback` additionally
    // returns instances that are removable but fail the visibility test,
    // used when nothing passes.
    std::vector<InstanceId> removable_visible(double visibility_threshold) const;
    std::vector<InstanceId> removable_all() const;

    // Fraction of this instance's silhouette pixels (top + side view) that
    // are unoccluded in the full world.
    double visible_fraction(InstanceId id) const;

    bool same_cells(const VoxelWorld& other) const;

  private:
    std::size_t index_of(const GridVec& cell) const;
    bool in_bounds_cell(const GridVec& cell) const;
    void check_pose_lattice(const Pose& pose) const;
    bool connected_at(const PosedGeom& g) const;

    const Catalog* catalog_;
    GridVec dims_;
    std::vector<InstanceId> grid_;  // cell -> owner, -1 when empty
    std::map<InstanceId, Instance> instances_;
    std::unordered_map<GridVec, InstanceId, GridVecHash> stud_at_;
    std::unordered_map<GridVec, InstanceId, GridVecHash> anti_at_;
    InstanceId next_id_ = 0;
};

}  // namespace brickplan
