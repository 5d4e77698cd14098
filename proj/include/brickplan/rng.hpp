#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace brickplan {

// Deterministic random streams. A single user-facing seed fans out into named
// sub-streams (generation, camera, noise, sampling, ...) so adding a consumer
// never perturbs the draws of another. mt19937_64 is bit-exact across
// platforms; the distribution helpers below are hand-rolled because the
// standard library distributions are not.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
        std::uint64_t h = 14695981039346656037ull ^ seed;
        for (char c : stream) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 1099511628211ull;
        }
        // splitmix64 finalizer to decorrelate nearby seeds
        h += 0x9e3779b97f4a7c15ull;
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
        h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
        return h ^ (h >> 31);
    }

    static Rng substream(std::uint64_t seed, std::string_view stream) {
        return Rng(derive_seed(seed, stream));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n), n > 0. Rejection keeps the result unbiased.
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = ~0ull - (~0ull % n);
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    int uniform_int(int lo, int hi) {  // inclusive range
        return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two uniforms per pair and caches the second value.
    double gaussian(double mean = 0.0, double sigma = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sigma * spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + sigma * r * std::cos(a);
    }

    // Weighted choice over non-negative weights; returns the chosen index.
    int weighted_choice(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double t = uniform() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            t -= weights[i];
            if (t < 0.0) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace brickplan
