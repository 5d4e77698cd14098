#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace brickplan {

// All discrete geometry lives on a half-unit lattice: one grid unit is one
// stud pitch (and one brick height), and every voxel cell, stud center and
// translation is an integer number of half-units. Using integers keeps set
// comparisons and connection tests exact.
struct GridVec {
    int x = 0;
    int y = 0;
    int z = 0;

    friend constexpr auto operator<=>(const GridVec&, const GridVec&) = default;

    constexpr GridVec operator+(const GridVec& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr GridVec operator-(const GridVec& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr GridVec operator-() const { return {-x, -y, -z}; }
};

struct GridVecHash {
    std::size_t operator()(const GridVec& v) const {
        // FNV-style mix; coordinates are small so collisions are not a concern.
        std::uint64_t h = 1469598103934665603ull;
        for (int c : {v.x, v.y, v.z}) {
            h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(c));
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

// Quarter turns about the vertical (+y) axis; the only rotations bricks admit.
struct Rotation {
    int quarter_turns = 0;  // 0..3

    friend constexpr auto operator<=>(const Rotation&, const Rotation&) = default;

    constexpr Rotation compose(Rotation o) const { return {(quarter_turns + o.quarter_turns) & 3}; }
};

struct Pose {
    GridVec translation;  // half-units
    Rotation rotation;

    friend constexpr auto operator<=>(const Pose&, const Pose&) = default;
};

// Exact quarter-turn maps about the lattice origin. Points and cells rotate
// differently: a cell is the half-open box [c, c+1)^3, so its image under a
// quarter turn has a shifted min corner.
constexpr GridVec rotate_point(const GridVec& p, Rotation r) {
    switch (r.quarter_turns & 3) {
        case 1: return {p.z, p.y, -p.x};
        case 2: return {-p.x, p.y, -p.z};
        case 3: return {-p.z, p.y, p.x};
        default: return p;
    }
}

constexpr GridVec rotate_cell(const GridVec& c, Rotation r) {
    switch (r.quarter_turns & 3) {
        case 1: return {c.z, c.y, -c.x - 1};
        case 2: return {-c.x - 1, c.y, -c.z - 1};
        case 3: return {-c.z - 1, c.y, c.x};
        default: return c;
    }
}

// Small double-precision vectors for camera math.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double norm() const;
};

// Half-unit lattice coordinates expressed in grid units.
inline Vec3 to_units(const GridVec& v) { return {v.x * 0.5, v.y * 0.5, v.z * 0.5}; }

// Center of the voxel cell with min corner `c`, in grid units.
inline Vec3 cell_center_units(const GridVec& c) {
    return {(c.x + 0.5) * 0.5, (c.y + 0.5) * 0.5, (c.z + 0.5) * 0.5};
}

struct Bounds {
    GridVec min;  // inclusive
    GridVec max;  // exclusive

    friend constexpr auto operator<=>(const Bounds&, const Bounds&) = default;
};

Bounds bounds_of(const std::vector<GridVec>& cells);

}  // namespace brickplan
