#include "brickplan/camera.hpp"

#include <algorithm>
#include <cmath>

#include "brickplan/error.hpp"

namespace brickplan {

namespace {

constexpr double kDegToRad = 0.017453292519943295;

Mat3 rot_x(double deg) {
    const double c = std::cos(deg * kDegToRad), s = std::sin(deg * kDegToRad);
    return Mat3{{1, 0, 0, 0, c, -s, 0, s, c}};
}

Mat3 rot_y(double deg) {
    const double c = std::cos(deg * kDegToRad), s = std::sin(deg * kDegToRad);
    return Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}};
}

Mat3 rot_z(double deg) {
    const double c = std::cos(deg * kDegToRad), s = std::sin(deg * kDegToRad);
    return Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}};
}

}  // namespace

Mat3 Mat3::multiply(const Mat3& o) const {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double v = 0.0;
            for (int k = 0; k < 3; ++k) v += m[r * 3 + k] * o.m[k * 3 + c];
            out.m[r * 3 + c] = v;
        }
    return out;
}

Mat3 rotation_matrix(const CameraParams& cam) {
    // Intrinsic Z-Y-X: roll about z, then yaw about the new y, then pitch
    // about the new x, applied to world points as R = Rz * Ry * Rx.
    return rot_z(cam.euler_deg[0]).multiply(rot_y(cam.euler_deg[1])).multiply(rot_x(cam.euler_deg[2]));
}

Vec2 project(const CameraParams& cam, const Vec3& v_units) {
    const Vec3 p = rotation_matrix(cam).apply(v_units);
    return {cam.scale * p.x + cam.t.x, cam.scale * p.y + cam.t.y};
}

Vec2 project_offset(const CameraParams& cam, const Vec3& d_units) {
    const Vec3 p = rotation_matrix(cam).apply(d_units);
    return {cam.scale * p.x, cam.scale * p.y};
}

void Raster::reset(int w, int h) {
    width = w;
    height = h;
    ids.assign(static_cast<std::size_t>(w) * h, -1);
    depth.assign(static_cast<std::size_t>(w) * h, kNoDepth);
    hit_axis.assign(static_cast<std::size_t>(w) * h, 0);
}

VoxelProjector::VoxelProjector(const CameraParams& cam) {
    if (cam.scale <= 0.0) throw ValidationError("camera scale must be positive");
    width_ = cam.width;
    height_ = cam.height;
    const Mat3 r = rotation_matrix(cam);
    // Forward projection rows: u = s*(R v).x + t.x, v = s*(R v).y + t.y.
    for (int k = 0; k < 3; ++k) {
        ru_[k] = cam.scale * r.m[0 * 3 + k];
        rv_[k] = cam.scale * r.m[1 * 3 + k];
    }
    tu_ = cam.t.x;
    tv_ = cam.t.y;
    // Pixel (px, py) has center (px + 0.5, py + 0.5) in projection coordinates
    // (y up; image serialization flips rows). Its orthographic ray is
    // origin(u, v) = u*bu + v*bv + b0, direction dir = R^T (0, 0, -1).
    const double inv_s = 1.0 / cam.scale;
    const Vec3 bu = r.apply_transposed({inv_s, 0, 0});
    const Vec3 bv = r.apply_transposed({0, inv_s, 0});
    const Vec3 b0 = r.apply_transposed({-cam.t.x * inv_s, -cam.t.y * inv_s, 0});
    const Vec3 dir = r.apply_transposed({0, 0, -1});
    bu_[0] = bu.x; bu_[1] = bu.y; bu_[2] = bu.z;
    bv_[0] = bv.x; bv_[1] = bv.y; bv_[2] = bv.z;
    b0_[0] = b0.x; b0_[1] = b0.y; b0_[2] = b0.z;
    dir_[0] = dir.x; dir_[1] = dir.y; dir_[2] = dir.z;
}

void rasterize_into(Raster& raster, const VoxelProjector& proj, const std::vector<GridVec>& voxels,
                    InstanceId id) {
    for (const GridVec& c : voxels) {
        proj.for_each_pixel(c, [&](std::size_t i, double t, int axis) {
            if (t < raster.depth[i] || (t == raster.depth[i] && id < raster.ids[i])) {
                raster.depth[i] = t;
                raster.ids[i] = id;
                raster.hit_axis[i] = static_cast<std::uint8_t>(axis);
            }
        });
    }
}

void rasterize_into(Raster& raster, const CameraParams& cam, const std::vector<GridVec>& voxels,
                    InstanceId id) {
    rasterize_into(raster, VoxelProjector(cam), voxels, id);
}

Raster rasterize(const CameraParams& cam, const VoxelWorld& world,
                 const std::vector<InstanceId>* subset) {
    Raster raster;
    raster.reset(cam.width, cam.height);
    const VoxelProjector proj(cam);
    if (subset) {
        for (InstanceId id : *subset)
            rasterize_into(raster, proj, world.instance(id).world.voxels, id);
    } else {
        for (const auto& [id, inst] : world.instances())
            rasterize_into(raster, proj, inst.world.voxels, id);
    }
    return raster;
}

std::vector<std::int32_t> mask_pixels(const Raster& raster, InstanceId id) {
    std::vector<std::int32_t> out;
    for (std::size_t i = 0; i < raster.ids.size(); ++i)
        if (raster.ids[i] == id) out.push_back(static_cast<std::int32_t>(i));
    return out;
}

Rgb label_color(const std::string& label) {
    static const Rgb palette[] = {
        {198, 40, 40},  {40, 110, 198}, {46, 160, 67},  {240, 180, 28},
        {150, 70, 190}, {235, 120, 36}, {70, 190, 190}, {205, 90, 140},
        {110, 130, 60}, {90, 90, 220},  {170, 120, 80}, {120, 190, 40},
        {190, 60, 80},  {60, 150, 130}, {130, 80, 150}, {220, 150, 110},
    };
    std::uint64_t h = 14695981039346656037ull;
    for (char c : label) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ull;
    }
    return palette[h % (sizeof(palette) / sizeof(palette[0]))];
}

ImageRgb render_manual(const CameraParams& cam, const VoxelWorld& world,
                       const std::vector<InstanceId>& new_instances) {
    const Raster raster = rasterize(cam, world);
    std::vector<bool> is_new;
    for (InstanceId id : new_instances) {
        if (id >= static_cast<InstanceId>(is_new.size())) is_new.resize(id + 1, false);
        is_new[id] = true;
    }
    auto fresh = [&](InstanceId id) {
        return id >= 0 && id < static_cast<InstanceId>(is_new.size()) && is_new[id];
    };

    ImageRgb img;
    img.width = raster.width;
    img.height = raster.height;
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, Rgb{255, 255, 255});
    const Rgb outline{40, 40, 40};
    const Rgb highlight_outline{220, 0, 0};
    // Fixed shade per hit-face axis keeps the flat colors legible.
    const double shade[3] = {0.80, 1.00, 0.62};

    for (int py = 0; py < raster.height; ++py) {
        for (int px = 0; px < raster.width; ++px) {
            const std::size_t i = raster.index(px, py);
            const InstanceId id = raster.ids[i];
            if (id < 0) continue;
            Rgb base = label_color(world.instance(id).label);
            double f = shade[raster.hit_axis[i]];
            if (fresh(id)) f = std::min(1.0, f + 0.18);  // brighten additions
            Rgb col{static_cast<std::uint8_t>(base.r * f), static_cast<std::uint8_t>(base.g * f),
                    static_cast<std::uint8_t>(base.b * f)};
            // Outline where the neighboring pixel belongs to something else.
            bool edge = false;
            for (const auto& [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                const int nx = px + dx, ny = py + dy;
                if (nx < 0 || ny < 0 || nx >= raster.width || ny >= raster.height) {
                    edge = true;
                    break;
                }
                if (raster.ids[raster.index(nx, ny)] != id) {
                    edge = true;
                    break;
                }
            }
            if (edge) col = fresh(id) ? highlight_outline : outline;
            // Projection y grows upward; image rows top-down.
            img.pixels[img.index(px, img.height - 1 - py)] = col;
        }
    }
    return img;
}

std::vector<std::uint16_t> id_mask16(const Raster& raster) {
    std::vector<std::uint16_t> out(static_cast<std::size_t>(raster.width) * raster.height, 0);
    for (int py = 0; py < raster.height; ++py)
        for (int px = 0; px < raster.width; ++px) {
            const InstanceId id = raster.ids[raster.index(px, py)];
            if (id >= 0)
                out[static_cast<std::size_t>(raster.height - 1 - py) * raster.width + px] =
                    static_cast<std::uint16_t>(id + 1);
        }
    return out;
}

}  // namespace brickplan
