#include <accgadget/kernels.hpp>

namespace accgadget::kernels::scalar {

void lottery_batch(std::uint64_t key, std::uint32_t slot, const lottery_threshold& t, std::uint32_t first_node,
                   std::span<std::uint8_t> out)
{
   for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = lottery_wins(t, lottery_hash(key, first_node + static_cast<std::uint32_t>(i), slot)) ? 1 : 0;
}

std::int64_t last_index_where(const std::int32_t* x1, const std::int32_t* x2, std::size_t begin, std::size_t end,
                              std::int32_t a0, std::int32_t d0)
{
   for (std::size_t i = end; i > begin; --i) {
      const std::size_t j = i - 1;
      if (x1[j] > a0 && x1[j] - x2[j] >= d0)
         return static_cast<std::int64_t>(j);
   }
   return -1;
}

} // namespace accgadget::kernels::scalar
