#pragma once

#include <array>
#include <cstdint>

namespace sslab::rng {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Every draw is a pure function of (seed, stream, index), so any partition of
// the index range across threads yields the same numbers.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Uniform on the open interval (0,1). `slot` selects one of two independent
// 53-bit outputs of the same Philox block.
double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, int slot = 0);

// Standard normal by inversion, one uniform per draw.
double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, int slot = 0);

// Standard normal truncated to [-bound, bound], by inversion.
double truncated_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index,
                        double bound, int slot = 0);

// Derives a child seed (e.g. per Monte Carlo replication) from a parent.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

// Well-known stream ids.
namespace stream {
inline constexpr std::uint64_t kPrice = 0;       // + good index
inline constexpr std::uint64_t kIncome = 16;
inline constexpr std::uint64_t kCharacteristic = 32; // + q index
inline constexpr std::uint64_t kInstrument = 64;
inline constexpr std::uint64_t kControl = 65;
inline constexpr std::uint64_t kLatentShare = 80;    // + share index
inline constexpr std::uint64_t kOracleDraws = 200;
inline constexpr std::uint64_t kBootstrap = 1u << 20; // + replicate
} // namespace stream

} // namespace sslab::rng
