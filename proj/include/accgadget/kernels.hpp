#pragma once
// Data-parallel inner loops: the block-production lottery evaluated for a
// whole committee at once, and the backward interval scan used by the
// checkpoint-strong pivot analysis. Each kernel has a scalar reference and
// an AVX2 variant; the variant is chosen at runtime from CPUID.

#include <cstddef>
#include <cstdint>
#include <span>

namespace accgadget::kernels {

enum class isa { scalar, avx2 };

/// Best instruction set supported by this CPU, unless overridden.
isa active_isa();
bool avx2_supported();
/// Forces a particular variant (tests); passing `isa::avx2` on a machine
/// without AVX2 silently keeps scalar.
void set_isa_override(isa which);
void clear_isa_override();

/// 32-bit lottery hash of (key, node, slot). Shared by every variant.
constexpr std::uint32_t fmix32(std::uint32_t h)
{
   h ^= h >> 16;
   h *= 0x85ebca6bU;
   h ^= h >> 13;
   h *= 0xc2b2ae35U;
   h ^= h >> 16;
   return h;
}

constexpr std::uint32_t lottery_hash(std::uint64_t key, std::uint32_t node, std::uint32_t slot)
{
   const auto lo = static_cast<std::uint32_t>(key);
   const auto hi = static_cast<std::uint32_t>(key >> 32);
   std::uint32_t h = fmix32((slot * 0x9e3779b1U) ^ lo);
   h = fmix32(h ^ (node * 0x85ebca77U) ^ hi);
   return fmix32(h + lo);
}

/// Probability p mapped onto the 32-bit hash range. p <= 0 never wins, p >= 1 always wins.
struct lottery_threshold
{
   bool always {false};
   std::uint32_t below {0};   // win iff hash < below
};

lottery_threshold make_threshold(double p);

constexpr bool lottery_wins(const lottery_threshold& t, std::uint32_t hash)
{
   return t.always || hash < t.below;
}

/// out[i] = 1 iff node (first_node + i) wins the lottery at `slot`.
void lottery_batch(std::uint64_t key, std::uint32_t slot, const lottery_threshold& t, std::uint32_t first_node,
                   std::span<std::uint8_t> out);

/// Largest i in [begin, end) with x1[i] > a0 && x1[i] - x2[i] >= d0, or -1.
std::int64_t last_index_where(std::span<const std::int32_t> x1, std::span<const std::int32_t> x2, std::size_t begin,
                              std::size_t end, std::int32_t a0, std::int32_t d0);

namespace scalar {
void lottery_batch(std::uint64_t key, std::uint32_t slot, const lottery_threshold& t, std::uint32_t first_node,
                   std::span<std::uint8_t> out);
std::int64_t last_index_where(const std::int32_t* x1, const std::int32_t* x2, std::size_t begin, std::size_t end,
                              std::int32_t a0, std::int32_t d0);
} // namespace scalar

namespace avx2 {
void lottery_batch(std::uint64_t key, std::uint32_t slot, const lottery_threshold& t, std::uint32_t first_node,
                   std::span<std::uint8_t> out);
std::int64_t last_index_where(const std::int32_t* x1, const std::int32_t* x2, std::size_t begin, std::size_t end,
                              std::int32_t a0, std::int32_t d0);
} // namespace avx2

} // namespace accgadget::kernels
