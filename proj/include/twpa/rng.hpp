#ifndef TWPA_RNG_HPP
#define TWPA_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based pseudo-random streams. A (seed, stream, chunk) triple
// maps to an independent splitmix64 sequence, so sample k of a stream is
// reproducible no matter how work is split across threads.

namespace twpa {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Mix a master seed with stream and chunk indices into a sub-seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t chunk) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s) ^ (stream * 0xd6e8feb86659fd93ull);
    std::uint64_t b = a;
    std::uint64_t c = splitmix64(b) ^ (chunk * 0xa5a5a5a5a5a5a5a5ull);
    return splitmix64(c);
}

class Splitmix64 {
  public:
    explicit Splitmix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in (0, 1].
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal pair via Box-Muller (fixed draw count per pair).
    void next_normal_pair(double& z0, double& z1) {
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        z0 = mag * std::cos(ang);
        z1 = mag * std::sin(ang);
    }

  private:
    std::uint64_t state_;
};

}  // namespace twpa

#endif
