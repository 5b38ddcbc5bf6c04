#include <accgadget/kernels.hpp>

#include <atomic>
#include <cmath>

namespace accgadget::kernels {

namespace {

std::atomic<int> override_isa {-1};

} // namespace

bool avx2_supported()
{
#if defined(__x86_64__) || defined(_M_X64)
   static const bool supported = __builtin_cpu_supports("avx2");
   return supported;
#else
   return false;
#endif
}

isa active_isa()
{
   const int o = override_isa.load(std::memory_order_relaxed);
   if (o == static_cast<int>(isa::scalar))
      return isa::scalar;
   return avx2_supported() ? isa::avx2 : isa::scalar;
}

void set_isa_override(isa which) { override_isa.store(static_cast<int>(which)); }

void clear_isa_override() { override_isa.store(-1); }

lottery_threshold make_threshold(double p)
{
   lottery_threshold t;
   if (!(p > 0.0))
      return t;
   if (p >= 1.0) {
      t.always = true;
      return t;
   }
   t.below = static_cast<std::uint32_t>(std::floor(p * 4294967296.0));
   return t;
}

void lottery_batch(std::uint64_t key, std::uint32_t slot, const lottery_threshold& t, std::uint32_t first_node,
                   std::span<std::uint8_t> out)
{
   if (active_isa() == isa::avx2)
      avx2::lottery_batch(key, slot, t, first_node, out);
   else
      scalar::lottery_batch(key, slot, t, first_node, out);
}

std::int64_t last_index_where(std::span<const std::int32_t> x1, std::span<const std::int32_t> x2, std::size_t begin,
                              std::size_t end, std::int32_t a0, std::int32_t d0)
{
   if (end > x1.size() || end > x2.size() || begin >= end)
      return -1;
   if (active_isa() == isa::avx2)
      return avx2::last_index_where(x1.data(), x2.data(), begin, end, a0, d0);
   return scalar::last_index_where(x1.data(), x2.data(), begin, end, a0, d0);
}

} // namespace accgadget::kernels
