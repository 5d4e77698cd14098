#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "brickplan/geometry.hpp"
#include "brickplan/world.hpp"

namespace brickplan {

// Weak-perspective (scaled orthographic) camera. A world point v maps to
//   image = scale * (R v)_xy + t
// with no depth division; R is built from intrinsic Z-Y-X Euler angles in
// degrees interpreted as (roll, yaw, pitch). Depth is the camera-frame
// distance along the viewing direction (-z in camera frame), so offsets in
// the image depend only on 3D offsets, never on absolute depth.
struct CameraParams {
    double scale = 8.0;                      // pixels per grid unit
    Vec2 t;                                  // pixel translation
    std::array<double, 3> euler_deg{0, 0, 0};  // roll (z), yaw (y), pitch (x)
    int width = 512;
    int height = 512;
};

struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Vec3 apply_transposed(const Vec3& v) const {
        return {m[0] * v.x + m[3] * v.y + m[6] * v.z, m[1] * v.x + m[4] * v.y + m[7] * v.z,
                m[2] * v.x + m[5] * v.y + m[8] * v.z};
    }
    Mat3 multiply(const Mat3& o) const;
};

Mat3 rotation_matrix(const CameraParams& cam);

Vec2 project(const CameraParams& cam, const Vec3& v_units);

// Linear part of the projection (t dropped); equals the image-space offset
// between the projections of two points separated by `d_units`.
Vec2 project_offset(const CameraParams& cam, const Vec3& d_units);

inline constexpr double kNoDepth = std::numeric_limits<double>::infinity();

// First-hit instance id and depth per pixel. id -1 where no voxel is hit;
// depth is finite exactly where an id is set.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<InstanceId> ids;
    std::vector<double> depth;
    std::vector<std::uint8_t> hit_axis;  // 0=x,1=y,2=z face of the first hit

    void reset(int w, int h);
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

// Orthographic ray caster for voxel boxes. Every covered pixel gets an exact
// ray/box intersection: the pixel's center ray is intersected with the voxel
// via slab tests, yielding the entry depth and entered face axis. Hot paths
// (rasterization, candidate scoring) iterate through this without indirection.
class VoxelProjector {
  public:
    explicit VoxelProjector(const CameraParams& cam);

    int width() const { return width_; }
    int height() const { return height_; }

    // fn(pixel_index, entry_depth, face_axis); pixels may repeat across voxels.
    template <typename F>
    void for_each_pixel(const GridVec& voxel, F&& fn) const {
        const double bmin[3] = {voxel.x * 0.5, voxel.y * 0.5, voxel.z * 0.5};
        const double bmax[3] = {bmin[0] + 0.5, bmin[1] + 0.5, bmin[2] + 0.5};
        // Bound the footprint by projecting the 8 corners.
        double umin = kNoDepth, umax = -kNoDepth, vmin = kNoDepth, vmax = -kNoDepth;
        for (int i = 0; i < 8; ++i) {
            const double cx = i & 1 ? bmax[0] : bmin[0];
            const double cy = i & 2 ? bmax[1] : bmin[1];
            const double cz = i & 4 ? bmax[2] : bmin[2];
            const double u = ru_[0] * cx + ru_[1] * cy + ru_[2] * cz + tu_;
            const double v = rv_[0] * cx + rv_[1] * cy + rv_[2] * cz + tv_;
            umin = u < umin ? u : umin;
            umax = u > umax ? u : umax;
            vmin = v < vmin ? v : vmin;
            vmax = v > vmax ? v : vmax;
        }
        const int px0 = std::max(0, static_cast<int>(std::floor(umin - 0.5)));
        const int px1 = std::min(width_ - 1, static_cast<int>(std::ceil(umax - 0.5)));
        const int py0 = std::max(0, static_cast<int>(std::floor(vmin - 0.5)));
        const int py1 = std::min(height_ - 1, static_cast<int>(std::ceil(vmax - 0.5)));
        for (int py = py0; py <= py1; ++py) {
            for (int px = px0; px <= px1; ++px) {
                const double u = px + 0.5;
                const double v = py + 0.5;
                double o[3] = {bu_[0] * u + bv_[0] * v + b0_[0],
                               bu_[1] * u + bv_[1] * v + b0_[1],
                               bu_[2] * u + bv_[2] * v + b0_[2]};
                double tmin = -kNoDepth, tmax = kNoDepth;
                int axis = 0;
                bool ok = true;
                for (int a = 0; a < 3 && ok; ++a) {
                    if (dir_[a] > -1e-15 && dir_[a] < 1e-15) {
                        ok = o[a] >= bmin[a] && o[a] <= bmax[a];
                        continue;
                    }
                    double t1 = (bmin[a] - o[a]) / dir_[a];
                    double t2 = (bmax[a] - o[a]) / dir_[a];
                    if (t1 > t2) std::swap(t1, t2);
                    if (t1 > tmin) {
                        tmin = t1;
                        axis = a;
                    }
                    if (t2 < tmax) tmax = t2;
                    ok = tmin <= tmax;
                }
                if (!ok) continue;
                fn(static_cast<std::size_t>(py) * width_ + px, tmin, axis);
            }
        }
    }

  private:
    int width_, height_;
    double ru_[3], rv_[3], tu_, tv_;       // projection rows (scaled) + translation
    double bu_[3], bv_[3], b0_[3], dir_[3];  // pixel-to-world ray frame
};

// Z-buffers one instance's voxels into an existing raster. Equal depths break
// toward the smaller instance id so the result is independent of draw order.
void rasterize_into(Raster& raster, const CameraParams& cam, const std::vector<GridVec>& voxels,
                    InstanceId id);
void rasterize_into(Raster& raster, const VoxelProjector& proj, const std::vector<GridVec>& voxels,
                    InstanceId id);

// Full scene, or a subset of instance ids when `subset` is non-null.
Raster rasterize(const CameraParams& cam, const VoxelWorld& world,
                 const std::vector<InstanceId>* subset = nullptr);

// Pixels (raster indices, sorted) where `id` is the first hit.
std::vector<std::int32_t> mask_pixels(const Raster& raster, InstanceId id);

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

struct ImageRgb {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;  // row 0 is the top row

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

// Deterministic per-label brick color.
Rgb label_color(const std::string& label);

// Flat-shaded manual image: every brick keeps one color per type label (with
// a fixed per-face-axis shade so edges read), instances listed in
// `new_instances` are brightened and given a contrasting outline.
ImageRgb render_manual(const CameraParams& cam, const VoxelWorld& world,
                       const std::vector<InstanceId>& new_instances);

// 16-bit instance-id mask (id + 1, background 0) from a raster.
std::vector<std::uint16_t> id_mask16(const Raster& raster);

}  // namespace brickplan
