#include <accgadget/kernels.hpp>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define ACCGADGET_X86 1
#else
#define ACCGADGET_X86 0
#endif

namespace accgadget::kernels::avx2 {

#if ACCGADGET_X86

namespace {

__attribute__((target("avx2"))) inline __m256i fmix32_v(__m256i h)
{
   h = _mm256_xor_si256(h, _mm256_srli_epi32(h, 16));
   h = _mm256_mullo_epi32(h, _mm256_set1_epi32(static_cast<int>(0x85ebca6bU)));
   h = _mm256_xor_si256(h, _mm256_srli_epi32(h, 13));
   h = _mm256_mullo_epi32(h, _mm256_set1_epi32(static_cast<int>(0xc2b2ae35U)));
   h = _mm256_xor_si256(h, _mm256_srli_epi32(h, 16));
   return h;
}

} // namespace

__attribute__((target("avx2"))) void lottery_batch(std::uint64_t key, std::uint32_t slot, const lottery_threshold& t,
                                                   std::uint32_t first_node, std::span<std::uint8_t> out)
{
   if (t.always) {
      for (auto& o : out)
         o = 1;
      return;
   }
   const auto lo = static_cast<std::uint32_t>(key);
   const auto hi = static_cast<std::uint32_t>(key >> 32);
   const std::uint32_t slot_part = fmix32((slot * 0x9e3779b1U) ^ lo);

   const __m256i v_slot = _mm256_set1_epi32(static_cast<int>(slot_part ^ hi));
   const __m256i v_lo = _mm256_set1_epi32(static_cast<int>(lo));
   const __m256i v_mul = _mm256_set1_epi32(static_cast<int>(0x85ebca77U));
   const __m256i bias = _mm256_set1_epi32(static_cast<int>(0x80000000U));
   const __m256i v_below = _mm256_xor_si256(_mm256_set1_epi32(static_cast<int>(t.below)), bias);
   const __m256i lane = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);

   std::size_t i = 0;
   const std::size_t n = out.size();
   for (; i + 8 <= n; i += 8) {
      __m256i node = _mm256_add_epi32(_mm256_set1_epi32(static_cast<int>(first_node + i)), lane);
      __m256i h = _mm256_xor_si256(v_slot, _mm256_mullo_epi32(node, v_mul));
      h = fmix32_v(h);
      h = fmix32_v(_mm256_add_epi32(h, v_lo));
      const __m256i lt = _mm256_cmpgt_epi32(v_below, _mm256_xor_si256(h, bias));
      const int mask = _mm256_movemask_ps(_mm256_castsi256_ps(lt));
      for (int b = 0; b < 8; ++b)
         out[i + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>((mask >> b) & 1);
   }
   for (; i < n; ++i)
      out[i] = lottery_wins(t, lottery_hash(key, first_node + static_cast<std::uint32_t>(i), slot)) ? 1 : 0;
}

__attribute__((target("avx2"))) std::int64_t last_index_where(const std::int32_t* x1, const std::int32_t* x2,
                                                              std::size_t begin, std::size_t end, std::int32_t a0,
                                                              std::int32_t d0)
{
   const __m256i v_a0 = _mm256_set1_epi32(a0);
   const __m256i v_d0m1 = _mm256_set1_epi32(d0 - 1);
   std::size_t i = end;
   while (i >= begin + 8) {
      const std::size_t base = i - 8;
      const __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(x1 + base));
      const __m256i c = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(x2 + base));
      const __m256i ok_a = _mm256_cmpgt_epi32(a, v_a0);
      const __m256i ok_d = _mm256_cmpgt_epi32(_mm256_sub_epi32(a, c), v_d0m1);
      const int mask = _mm256_movemask_ps(_mm256_castsi256_ps(_mm256_and_si256(ok_a, ok_d)));
      if (mask != 0)
         return static_cast<std::int64_t>(base) + 31 - __builtin_clz(static_cast<unsigned>(mask));
      i = base;
   }
   return scalar::last_index_where(x1, x2, begin, i, a0, d0);
}

#else

void lottery_batch(std::uint64_t key, std::uint32_t slot, const lottery_threshold& t, std::uint32_t first_node,
                   std::span<std::uint8_t> out)
{
   scalar::lottery_batch(key, slot, t, first_node, out);
}

std::int64_t last_index_where(const std::int32_t* x1, const std::int32_t* x2, std::size_t begin, std::size_t end,
                              std::int32_t a0, std::int32_t d0)
{
   return scalar::last_index_where(x1, x2, begin, end, a0, d0);
}

#endif

} // namespace accgadget::kernels::avx2
