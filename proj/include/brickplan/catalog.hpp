#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "brickplan/geometry.hpp"

namespace brickplan {

using BrickTypeId = std::string;

// Resolved shape of a brick type: axis-aligned box occupancy at double
// resolution (2x2x2 voxels per unit cell), studs centered on top cells and
// anti-studs centered on bottom cells. Positions are half-unit lattice points.
struct BrickGeometry {
    BrickTypeId id;
    GridVec size;                  // units: width (x), height (y), depth (z)
    std::vector<GridVec> voxels;   // cell min corners, local frame, bbox min at origin
    std::vector<GridVec> studs;    // connector points on the top surface
    std::vector<GridVec> anti_studs;  // receptacle points on the bottom surface
    int symmetry_order = 1;        // 1, 2 or 4: invariant under 360/order degrees
};

class Catalog {
  public:
    static Catalog load(const std::string& path);
    static Catalog from_json_text(const std::string& text, const std::string& origin = "<memory>");

    const BrickGeometry& geometry(const BrickTypeId& id) const;
    bool contains(const BrickTypeId& id) const { return bricks_.count(id) > 0; }
    std::vector<BrickTypeId> ids() const;

    void add(BrickGeometry g);  // validates and inserts

  private:
    std::map<BrickTypeId, BrickGeometry> bricks_;
};

// A component is either a single brick or a rigid group of posed bricks
// (a submodule, pre-flattened to primitives).
struct ComponentPart {
    BrickTypeId type;
    Pose pose;  // in the submodule's local frame

    friend auto operator<=>(const ComponentPart&, const ComponentPart&) = default;
};

struct Component {
    BrickTypeId primitive;              // set when parts is empty
    std::vector<ComponentPart> parts;   // non-empty for submodules

    bool is_submodule() const { return !parts.empty(); }

    friend auto operator<=>(const Component&, const Component&) = default;

    static Component brick(BrickTypeId id) { return Component{std::move(id), {}}; }
    static Component submodule(std::vector<ComponentPart> parts) { return Component{{}, std::move(parts)}; }
};

// Local-frame shape of a component with everything inference needs: occupancy,
// connectors, the keypoint (center of the top surface of the topmost brick)
// and any alternate keypoints from ties at the same height.
struct ComponentGeom {
    std::vector<GridVec> voxels;
    std::vector<GridVec> studs;
    std::vector<GridVec> anti_studs;
    GridVec keypoint;
    std::vector<GridVec> alternate_keypoints;
    Bounds bbox;
    int symmetry_order = 1;
};

ComponentGeom resolve(const Catalog& catalog, const Component& component);

// Quarter-turn rotation about the shape's vertical bounding-box axis. The
// lattice rotation is exact; the result is re-anchored so its bounding-box
// center matches the input's as closely as the lattice allows.
BrickGeometry rotated(const BrickGeometry& g, Rotation r);
ComponentGeom rotated(const ComponentGeom& g, Rotation r);

// Keypoint of a component: center of the top surface of its topmost brick,
// ties broken by lowest (x, z); alternates keep the tied candidates.
GridVec component_keypoint(const Catalog& catalog, const Component& component);

// Largest n in {4, 2, 1} under which the shape (occupancy and connectors)
// maps onto itself when rotated by 360/n degrees.
int derive_symmetry_order(const ComponentGeom& g);

// Rotations that produce distinct shapes given the symmetry order.
std::vector<Rotation> reduced_rotations(int symmetry_order);

// Seven-way rotation coding shared by the detector and the solver:
// code 0            -> fully symmetric (order 4), canonical rotation 0
// codes 1..2        -> order 2, rotation (code-1) quarter turns
// codes 3..6        -> order 1, rotation (code-3) quarter turns
struct SymmetryClass7 {
    int code = 0;

    friend constexpr auto operator<=>(const SymmetryClass7&, const SymmetryClass7&) = default;
};

SymmetryClass7 symmetry_encode(int symmetry_order, Rotation r);

struct DecodedRotation {
    int symmetry_order;
    Rotation canonical;
};

DecodedRotation symmetry_decode(SymmetryClass7 cls);

// True when the two rotations are equivalent for a shape of the given order.
bool rotation_equivalent(int symmetry_order, Rotation a, Rotation b);

}  // namespace brickplan
