#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace accgadget {

using NodeId = std::uint32_t;
using Slot = std::int64_t;
using TxId = std::uint64_t;
using Iteration = std::int64_t;

inline constexpr Slot never = std::numeric_limits<Slot>::max() / 4;

struct BlockId
{
   std::uint64_t value {0};

   auto operator<=>(const BlockId&) const = default;
};

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(const std::string& s);

// splitmix64 finalizer; the building block for every simulated hash.
constexpr std::uint64_t mix64(std::uint64_t x)
{
   x += 0x9e3779b97f4a7c15ULL;
   x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
   x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
   return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v)
{
   return mix64(h ^ mix64(v + 0x632be59bd9b4e019ULL));
}

/// Independent random streams derived from one master seed.
enum class stream : std::uint64_t { lottery = 1, cp_leader = 2, bft_leader = 3, adversary = 4, schedule = 5, signing = 6 };

constexpr std::uint64_t derive_seed(std::uint64_t master, stream s)
{
   return hash_combine(mix64(master), static_cast<std::uint64_t>(s));
}

struct config_invalid : std::runtime_error
{
   using std::runtime_error::runtime_error;
};

struct conflicting_checkpoints : std::runtime_error
{
   using std::runtime_error::runtime_error;
};

struct not_conflicting : std::runtime_error
{
   using std::runtime_error::runtime_error;
};

struct evidence_invalid : std::runtime_error
{
   using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error
{
   using std::runtime_error::runtime_error;
};

} // namespace accgadget

template <>
struct std::hash<accgadget::BlockId>
{
   std::size_t operator()(const accgadget::BlockId& id) const noexcept { return static_cast<std::size_t>(id.value); }
};
