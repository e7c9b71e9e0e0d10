#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace voxnav {

// Deterministic xoshiro256** generator seeded through splitmix64.
// Output is identical on every platform; all project randomness flows
// through this class. Named substreams let a single root seed drive
// independent stages (scene, sample, init, rollout) without coupling.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    Rng(std::uint64_t root_seed, std::string_view stream);

    // Derive an independent substream from this generator's seed lineage.
    Rng fork(std::string_view stream) const;

    std::uint64_t next_u64();
    std::uint64_t bounded(std::uint64_t n);  // uniform in [0, n), unbiased

    double uniform();                        // [0, 1)
    double uniform(double lo, double hi);    // [lo, hi)
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive range [lo, hi]
    double gaussian();                       // standard normal, Box-Muller

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::array<std::uint64_t, 4> s_{};
    std::uint64_t lineage_ = 0;  // seed used to derive forks
    bool has_cached_gauss_ = false;
    double cached_gauss_ = 0.0;
};

}  // namespace voxnav
