#include "sslab/rng.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>

namespace sslab::rng {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double inverse_normal(double u) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u); }

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, int slot) {
    const auto out = philox4x32({static_cast<std::uint32_t>(index),
                                 static_cast<std::uint32_t>(index >> 32),
                                 static_cast<std::uint32_t>(stream),
                                 static_cast<std::uint32_t>(stream >> 32)},
                                {static_cast<std::uint32_t>(seed),
                                 static_cast<std::uint32_t>(seed >> 32)});
    const int base = (slot & 1) * 2;
    const std::uint64_t bits =
        ((static_cast<std::uint64_t>(out[base]) << 32) | out[base + 1]) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, int slot) {
    return inverse_normal(uniform(seed, stream, index, slot));
}

double truncated_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index,
                        double bound, int slot) {
    const double lo = 0.5 * std::erfc(bound / std::sqrt(2.0));
    const double u = uniform(seed, stream, index, slot);
    return inverse_normal(lo + (1.0 - 2.0 * lo) * u);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(splitmix64(seed) ^ (tag * 0xD1B54A32D192ED03ull + 1));
}

} // namespace sslab::rng
