#include "voxnav/rng.hpp"

#include <cmath>

#include "voxnav/common.hpp"

namespace voxnav {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : lineage_(seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
    // xoshiro state must not be all zero; splitmix64 cannot produce that
    // for four consecutive outputs, so no further handling is needed.
}

Rng::Rng(std::uint64_t root_seed, std::string_view stream)
    : Rng(root_seed ^ fnv1a64(stream)) {}

Rng Rng::fork(std::string_view stream) const { return Rng(lineage_, stream); }

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

std::uint64_t Rng::bounded(std::uint64_t n) {
    contract(n > 0, "Rng::bounded: n must be positive");
    const std::uint64_t threshold = (~n + 1) % n;  // (2^64 - n) % n
    for (;;) {
        std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    contract(lo <= hi, "Rng::uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(bounded(span));
}

double Rng::gaussian() {
    if (has_cached_gauss_) {
        has_cached_gauss_ = false;
        return cached_gauss_;
    }
    // Box-Muller; u1 shifted away from zero so log() stays finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_gauss_ = r * std::sin(theta);
    has_cached_gauss_ = true;
    return r * std::cos(theta);
}

}  // namespace voxnav
