#include "brickplan/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "brickplan/error.hpp"

namespace brickplan {

namespace {

using nlohmann::json;

bool valid_id(const std::string& id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

// Shared rotation core: rotate cells and points exactly about the origin,
// then translate so the rotated bounding box re-centers on the original one.
// With even-sized boxes the recentering is exact; odd sizes snap by half a
// voxel toward the lattice floor, deterministically.
struct RotatedSets {
    std::vector<GridVec> cells;
    GridVec shift;  // applied to rotated points as well
};

RotatedSets rotate_cells_recentered(const std::vector<GridVec>& cells, Rotation r) {
    RotatedSets out;
    out.cells.reserve(cells.size());
    if (cells.empty()) return out;
    const Bounds before = bounds_of(cells);
    for (const GridVec& c : cells) out.cells.push_back(rotate_cell(c, r));
    const Bounds after = bounds_of(out.cells);
    auto recenter = [](int lo0, int hi0, int lo1, int hi1) {
        // Twice-center difference, floored to the lattice.
        int delta = (lo0 + hi0) - (lo1 + hi1);
        return delta >= 0 ? delta / 2 : -((-delta + 1) / 2);
    };
    out.shift = {recenter(before.min.x, before.max.x, after.min.x, after.max.x),
                 recenter(before.min.y, before.max.y, after.min.y, after.max.y),
                 recenter(before.min.z, before.max.z, after.min.z, after.max.z)};
    for (GridVec& c : out.cells) c = c + out.shift;
    return out;
}

std::vector<GridVec> rotate_points_with(const std::vector<GridVec>& points, Rotation r,
                                        const GridVec& shift) {
    std::vector<GridVec> out;
    out.reserve(points.size());
    for (const GridVec& p : points) out.push_back(rotate_point(p, r) + shift);
    return out;
}

void sort_unique(std::vector<GridVec>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

bool same_set(std::vector<GridVec> a, std::vector<GridVec> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

bool invariant_under(const ComponentGeom& g, Rotation r) {
    ComponentGeom rot = rotated(g, r);
    return same_set(rot.voxels, g.voxels) && same_set(rot.studs, g.studs) &&
           same_set(rot.anti_studs, g.anti_studs);
}

ComponentGeom geom_from_brick(const BrickGeometry& b) {
    ComponentGeom g;
    g.voxels = b.voxels;
    g.studs = b.studs;
    g.anti_studs = b.anti_studs;
    g.bbox = bounds_of(b.voxels);
    // Top-surface center; the rotation axis passes through it, so it is
    // rotation-invariant for box bricks.
    g.keypoint = {b.size.x, 2 * b.size.y, b.size.z};
    g.symmetry_order = b.symmetry_order;
    return g;
}

}  // namespace

Bounds bounds_of(const std::vector<GridVec>& cells) {
    Bounds b{{0, 0, 0}, {0, 0, 0}};
    if (cells.empty()) return b;
    b.min = cells.front();
    b.max = cells.front();
    for (const GridVec& c : cells) {
        b.min.x = std::min(b.min.x, c.x);
        b.min.y = std::min(b.min.y, c.y);
        b.min.z = std::min(b.min.z, c.z);
        b.max.x = std::max(b.max.x, c.x);
        b.max.y = std::max(b.max.y, c.y);
        b.max.z = std::max(b.max.z, c.z);
    }
    b.max = b.max + GridVec{1, 1, 1};
    return b;
}

double Vec2::norm() const { return std::sqrt(x * x + y * y); }
double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

BrickGeometry rotated(const BrickGeometry& g, Rotation r) {
    BrickGeometry out = g;
    RotatedSets cells = rotate_cells_recentered(g.voxels, r);
    out.voxels = std::move(cells.cells);
    out.studs = rotate_points_with(g.studs, r, cells.shift);
    out.anti_studs = rotate_points_with(g.anti_studs, r, cells.shift);
    if (r.quarter_turns % 2 == 1) out.size = {g.size.z, g.size.y, g.size.x};
    std::sort(out.voxels.begin(), out.voxels.end());
    std::sort(out.studs.begin(), out.studs.end());
    std::sort(out.anti_studs.begin(), out.anti_studs.end());
    return out;
}

ComponentGeom rotated(const ComponentGeom& g, Rotation r) {
    ComponentGeom out;
    RotatedSets cells = rotate_cells_recentered(g.voxels, r);
    out.voxels = std::move(cells.cells);
    out.studs = rotate_points_with(g.studs, r, cells.shift);
    out.anti_studs = rotate_points_with(g.anti_studs, r, cells.shift);
    out.keypoint = rotate_point(g.keypoint, r) + cells.shift;
    out.alternate_keypoints = rotate_points_with(g.alternate_keypoints, r, cells.shift);
    out.bbox = bounds_of(out.voxels);
    out.symmetry_order = g.symmetry_order;
    std::sort(out.voxels.begin(), out.voxels.end());
    std::sort(out.studs.begin(), out.studs.end());
    std::sort(out.anti_studs.begin(), out.anti_studs.end());
    return out;
}

ComponentGeom resolve(const Catalog& catalog, const Component& component) {
    if (!component.is_submodule()) {
        return geom_from_brick(catalog.geometry(component.primitive));
    }
    ComponentGeom g;
    struct PartTop {
        GridVec keypoint;
    };
    std::vector<GridVec> part_keypoints;
    for (const ComponentPart& part : component.parts) {
        ComponentGeom pg = geom_from_brick(catalog.geometry(part.type));
        ComponentGeom pr = rotated(pg, part.pose.rotation);
        const GridVec t = part.pose.translation;
        for (const GridVec& v : pr.voxels) g.voxels.push_back(v + t);
        for (const GridVec& s : pr.studs) g.studs.push_back(s + t);
        for (const GridVec& a : pr.anti_studs) g.anti_studs.push_back(a + t);
        part_keypoints.push_back(pr.keypoint + t);
    }
    if (g.voxels.empty()) throw ValidationError("submodule has no parts");
    sort_unique(g.voxels);
    sort_unique(g.studs);
    sort_unique(g.anti_studs);
    g.bbox = bounds_of(g.voxels);

    // Keypoint: the topmost part's top-surface center; ties at the same
    // height are broken by lowest (x, z) and kept as alternates.
    int top_y = part_keypoints.front().y;
    for (const GridVec& k : part_keypoints) top_y = std::max(top_y, k.y);
    std::vector<GridVec> tied;
    for (const GridVec& k : part_keypoints)
        if (k.y == top_y) tied.push_back(k);
    std::sort(tied.begin(), tied.end(), [](const GridVec& a, const GridVec& b) {
        return std::tie(a.x, a.z) < std::tie(b.x, b.z);
    });
    tied.erase(std::unique(tied.begin(), tied.end()), tied.end());
    g.keypoint = tied.front();
    g.alternate_keypoints.assign(tied.begin() + 1, tied.end());

    g.symmetry_order = derive_symmetry_order(g);
    return g;
}

GridVec component_keypoint(const Catalog& catalog, const Component& component) {
    return resolve(catalog, component).keypoint;
}

int derive_symmetry_order(const ComponentGeom& g) {
    if (invariant_under(g, Rotation{1})) return 4;
    if (invariant_under(g, Rotation{2})) return 2;
    return 1;
}

std::vector<Rotation> reduced_rotations(int symmetry_order) {
    switch (symmetry_order) {
        case 4: return {Rotation{0}};
        case 2: return {Rotation{0}, Rotation{1}};
        default: return {Rotation{0}, Rotation{1}, Rotation{2}, Rotation{3}};
    }
}

SymmetryClass7 symmetry_encode(int symmetry_order, Rotation r) {
    const int q = r.quarter_turns & 3;
    switch (symmetry_order) {
        case 4: return {0};
        case 2: return {1 + (q & 1)};
        case 1: return {3 + q};
        default: throw ValidationError("symmetry order must be 1, 2 or 4");
    }
}

DecodedRotation symmetry_decode(SymmetryClass7 cls) {
    if (cls.code == 0) return {4, Rotation{0}};
    if (cls.code == 1 || cls.code == 2) return {2, Rotation{cls.code - 1}};
    if (cls.code >= 3 && cls.code <= 6) return {1, Rotation{cls.code - 3}};
    throw ValidationError("rotation class code out of range: " + std::to_string(cls.code));
}

bool rotation_equivalent(int symmetry_order, Rotation a, Rotation b) {
    const int period = 4 / symmetry_order;  // quarter turns between distinct shapes
    return ((a.quarter_turns - b.quarter_turns) % period + period) % period == 0;
}

void Catalog::add(BrickGeometry g) {
    if (!valid_id(g.id))
        throw ValidationError("brick id must match [A-Za-z0-9_]+: '" + g.id + "'");
    if (bricks_.count(g.id)) throw ValidationError("duplicate brick id: " + g.id);
    if (g.size.x <= 0 || g.size.y <= 0 || g.size.z <= 0)
        throw ValidationError("brick " + g.id + ": size entries must be positive");
    if (g.voxels.empty()) throw ValidationError("brick " + g.id + ": empty occupancy");
    if (g.symmetry_order != 1 && g.symmetry_order != 2 && g.symmetry_order != 4)
        throw ValidationError("brick " + g.id + ": symmetry must be 1, 2 or 4");
    ComponentGeom cg = geom_from_brick(g);
    if (g.symmetry_order > 1 && !invariant_under(cg, Rotation{4 / g.symmetry_order}))
        throw ValidationError("brick " + g.id + ": declared symmetry " +
                              std::to_string(g.symmetry_order) +
                              " but the shape is not invariant under that rotation");
    bricks_.emplace(g.id, std::move(g));
}

const BrickGeometry& Catalog::geometry(const BrickTypeId& id) const {
    auto it = bricks_.find(id);
    if (it == bricks_.end()) throw ValidationError("unknown brick type: " + id);
    return it->second;
}

std::vector<BrickTypeId> Catalog::ids() const {
    std::vector<BrickTypeId> out;
    out.reserve(bricks_.size());
    for (const auto& [id, g] : bricks_) out.push_back(id);
    return out;
}

namespace {

BrickGeometry brick_from_json(const json& e, const std::string& origin, std::size_t index) {
    const std::string where = origin + " entry " + std::to_string(index);
    if (!e.is_object()) throw ParseError(where + ": expected an object");
    BrickGeometry g;
    try {
        g.id = e.at("id").get<std::string>();
        const auto& size = e.at("size");
        if (!size.is_array() || size.size() != 3)
            throw ParseError(where + ": size must be [w, h, d]");
        g.size = {size[0].get<int>(), size[1].get<int>(), size[2].get<int>()};
    } catch (const json::exception& ex) {
        throw ParseError(where + ": " + ex.what());
    }
    if (g.size.x <= 0 || g.size.y <= 0 || g.size.z <= 0)
        throw ValidationError(where + " (" + g.id + "): size entries must be positive");

    for (int x = 0; x < 2 * g.size.x; ++x)
        for (int y = 0; y < 2 * g.size.y; ++y)
            for (int z = 0; z < 2 * g.size.z; ++z) g.voxels.push_back({x, y, z});

    auto cells = [&](const char* key, int face_y) {
        std::vector<GridVec> out;
        if (!e.contains(key)) {
            // Default: a connector at the center of every unit cell of the face.
            for (int i = 0; i < g.size.x; ++i)
                for (int j = 0; j < g.size.z; ++j) out.push_back({2 * i + 1, face_y, 2 * j + 1});
            return out;
        }
        const auto& arr = e.at(key);
        if (!arr.is_array()) throw ParseError(where + ": " + key + " must be a list of [i, j]");
        std::set<std::pair<int, int>> seen;
        for (const auto& c : arr) {
            if (!c.is_array() || c.size() != 2)
                throw ParseError(where + ": " + key + " entries must be [i, j]");
            const int i = c[0].get<int>();
            const int j = c[1].get<int>();
            if (i < 0 || i >= g.size.x || j < 0 || j >= g.size.z)
                throw ValidationError(where + " (" + g.id + "): " + key + " cell [" +
                                      std::to_string(i) + ", " + std::to_string(j) +
                                      "] outside the footprint");
            if (!seen.insert({i, j}).second)
                throw ValidationError(where + " (" + g.id + "): duplicate " + key + " cell");
            out.push_back({2 * i + 1, face_y, 2 * j + 1});
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    g.studs = cells("stud_cells", 2 * g.size.y);
    g.anti_studs = cells("anti_stud_cells", 0);

    if (e.contains("symmetry")) {
        g.symmetry_order = e.at("symmetry").get<int>();
    } else {
        ComponentGeom cg;
        cg.voxels = g.voxels;
        cg.studs = g.studs;
        cg.anti_studs = g.anti_studs;
        cg.bbox = bounds_of(g.voxels);
        cg.keypoint = {g.size.x, 2 * g.size.y, g.size.z};
        g.symmetry_order = derive_symmetry_order(cg);
    }
    return g;
}

}  // namespace

Catalog Catalog::from_json_text(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& ex) {
        throw ParseError(origin + ": " + ex.what());
    }
    const json* entries = &doc;
    if (doc.is_object()) {
        if (!doc.contains("bricks")) throw ParseError(origin + ": missing 'bricks' list");
        entries = &doc.at("bricks");
    }
    if (!entries->is_array()) throw ParseError(origin + ": expected a list of brick entries");
    Catalog catalog;
    std::size_t index = 0;
    for (const auto& e : *entries) catalog.add(brick_from_json(e, origin, index++));
    if (catalog.bricks_.empty()) throw ValidationError(origin + ": catalog has no bricks");
    return catalog;
}

Catalog Catalog::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open catalog file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str(), path);
}

}  // namespace brickplan
