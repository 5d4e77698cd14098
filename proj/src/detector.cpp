#include "brickplan/detector.hpp"

#include <algorithm>

#include "brickplan/error.hpp"
#include "brickplan/rng.hpp"

namespace brickplan {

namespace {

void sort_canonical(std::vector<Detection>& dets) {
    std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        const std::int32_t am = a.mask.empty() ? -1 : a.mask.front();
        const std::int32_t bm = b.mask.empty() ? -1 : b.mask.front();
        return std::tie(a.keypoint.y, a.keypoint.x, am) < std::tie(b.keypoint.y, b.keypoint.x, bm);
    });
}

std::vector<std::int32_t> morph_mask(const std::vector<std::int32_t>& mask, int width, int height,
                                     int radius, bool dilate) {
    if (radius == 0 || mask.empty()) return mask;
    std::vector<std::uint8_t> in(static_cast<std::size_t>(width) * height, 0);
    for (std::int32_t i : mask) in[i] = 1;
    std::vector<std::int32_t> out;
    // Square structuring element of the given Chebyshev radius.
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            bool any = false, all = true;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    const bool v = nx >= 0 && ny >= 0 && nx < width && ny < height &&
                                   in[static_cast<std::size_t>(ny) * width + nx];
                    any = any || v;
                    all = all && v;
                }
            }
            if (dilate ? any : all) out.push_back(y * width + x);
        }
    }
    return out;
}

}  // namespace

StepObservation oracle_detect(const VoxelWorld& base, const std::vector<StepAddition>& additions,
                              const CameraParams& cam) {
    VoxelWorld scene = base;
    std::vector<std::pair<InstanceId, const StepAddition*>> placed;
    for (const StepAddition& a : additions) {
        // Ground truth is assumed valid; placements here are not re-gated on
        // connectivity so observations can be produced for any scene.
        placed.emplace_back(scene.place(a.component, a.pose, a.type_key, false), &a);
    }
    const Raster raster = rasterize(cam, scene);

    StepObservation obs;
    obs.width = cam.width;
    obs.height = cam.height;
    const Catalog& catalog = base.catalog();
    for (const auto& [id, addition] : placed) {
        Detection det;
        ComponentGeom local = resolve(catalog, addition->component);
        ComponentGeom posed = rotated(local, addition->pose.rotation);
        const GridVec kp = posed.keypoint + addition->pose.translation;
        det.keypoint = project(cam, to_units(kp));
        det.mask = mask_pixels(raster, id);
        if (!addition->component.is_submodule())
            det.rotation_class = symmetry_encode(local.symmetry_order, addition->pose.rotation);
        obs.detections[addition->type_key].push_back(std::move(det));
    }
    for (auto& [key, dets] : obs.detections) sort_canonical(dets);
    return obs;
}

StepObservation noisy_detect(const StepObservation& oracle, const NoiseSpec& noise) {
    if (noise.keypoint_sigma < 0 || noise.rotation_flip_prob < 0 || noise.rotation_flip_prob > 1 ||
        noise.mask_morph_radius < 0 || noise.keypoint_truncate < 0)
        throw ValidationError("noise parameters must be non-negative (flip probability in [0,1])");

    Rng rng = Rng::substream(noise.seed, "detector_noise");
    StepObservation out = oracle;
    for (auto& [key, dets] : out.detections) {
        for (Detection& det : dets) {
            if (noise.keypoint_sigma > 0) {
                double dx = rng.gaussian(0, noise.keypoint_sigma);
                double dy = rng.gaussian(0, noise.keypoint_sigma);
                while (noise.keypoint_truncate > 0 &&
                       std::sqrt(dx * dx + dy * dy) >= noise.keypoint_truncate) {
                    dx = rng.gaussian(0, noise.keypoint_sigma);
                    dy = rng.gaussian(0, noise.keypoint_sigma);
                }
                det.keypoint.x += dx;
                det.keypoint.y += dy;
            }
            if (det.rotation_class && noise.rotation_flip_prob > 0 &&
                rng.uniform() < noise.rotation_flip_prob) {
                // Uniform over the other classes valid for the same symmetry
                // order; an order-4 class has no alternative.
                const int order = symmetry_decode(*det.rotation_class).symmetry_order;
                std::vector<int> options;
                if (order == 2) options = {1, 2};
                if (order == 1) options = {3, 4, 5, 6};
                std::erase(options, det.rotation_class->code);
                if (!options.empty())
                    det.rotation_class =
                        SymmetryClass7{options[rng.uniform_index(options.size())]};
            }
            if (noise.mask_morph_radius > 0) {
                const bool dilate = rng.uniform() < 0.5;
                det.mask = morph_mask(det.mask, oracle.width, oracle.height,
                                      noise.mask_morph_radius, dilate);
            }
        }
        sort_canonical(dets);
    }
    return out;
}

std::vector<std::int32_t> mask_to_rle(const std::vector<std::int32_t>& mask) {
    std::vector<std::int32_t> rle;
    std::size_t i = 0;
    while (i < mask.size()) {
        std::size_t j = i + 1;
        while (j < mask.size() && mask[j] == mask[j - 1] + 1) ++j;
        rle.push_back(mask[i]);
        rle.push_back(static_cast<std::int32_t>(j - i));
        i = j;
    }
    return rle;
}

std::vector<std::int32_t> rle_to_mask(const std::vector<std::int32_t>& rle) {
    if (rle.size() % 2 != 0) throw ParseError("mask run-length list must have even length");
    std::vector<std::int32_t> mask;
    for (std::size_t i = 0; i < rle.size(); i += 2) {
        const std::int32_t start = rle[i];
        const std::int32_t len = rle[i + 1];
        if (start < 0 || len <= 0) throw ParseError("mask runs must be positive");
        for (std::int32_t k = 0; k < len; ++k) mask.push_back(start + k);
    }
    if (!std::is_sorted(mask.begin(), mask.end()))
        throw ParseError("mask runs must be sorted and non-overlapping");
    return mask;
}

}  // namespace brickplan
