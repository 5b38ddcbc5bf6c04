#include <accgadget/kernels.hpp>

#include <doctest.h>

#include <random>
#include <vector>

using namespace accgadget::kernels;

namespace {

std::int64_t naive_last_index(const std::vector<std::int32_t>& x1, const std::vector<std::int32_t>& x2,
                              std::size_t begin, std::size_t end, std::int32_t a0, std::int32_t d0)
{
   std::int64_t found = -1;
   for (std::size_t i = begin; i < end; ++i)
      if (x1[i] > a0 && x1[i] - x2[i] >= d0)
         found = static_cast<std::int64_t>(i);
   return found;
}

} // namespace

TEST_CASE("make_threshold edge cases")
{
   CHECK_FALSE(make_threshold(0.0).always);
   CHECK(make_threshold(0.0).below == 0);
   CHECK(make_threshold(-1.0).below == 0);
   CHECK(make_threshold(1.0).always);
   CHECK(make_threshold(2.0).always);
   CHECK(make_threshold(0.5).below == 0x80000000U);
   CHECK_FALSE(lottery_wins(make_threshold(0.0), 0));
   CHECK(lottery_wins(make_threshold(1.0), 0xffffffffU));
}

TEST_CASE("lottery hash is a fixed function of its inputs")
{
   static_assert(lottery_hash(1, 2, 3) == lottery_hash(1, 2, 3));
   CHECK(lottery_hash(1, 2, 3) != lottery_hash(1, 3, 2));
   CHECK(lottery_hash(1, 2, 3) != lottery_hash(2, 2, 3));
}

TEST_CASE("lottery_batch: scalar and avx2 agree with the per-node rule")
{
   std::mt19937_64 rng(11);
   for (int round = 0; round < 200; ++round) {
      const std::uint64_t key = rng();
      const auto slot = static_cast<std::uint32_t>(rng() % 100000);
      const auto first = static_cast<std::uint32_t>(rng() % 1000);
      const std::size_t count = rng() % 70;
      const auto t = make_threshold(static_cast<double>(rng() % 1000) / 999.0);

      std::vector<std::uint8_t> ref(count), s(count), v(count);
      for (std::size_t i = 0; i < count; ++i)
         ref[i] = lottery_wins(t, lottery_hash(key, first + static_cast<std::uint32_t>(i), slot));
      scalar::lottery_batch(key, slot, t, first, s);
      CHECK(s == ref);
      if (avx2_supported()) {
         avx2::lottery_batch(key, slot, t, first, v);
         CHECK(v == ref);
      }
   }
}

TEST_CASE("lottery win frequency matches p")
{
   const auto t = make_threshold(0.01);
   std::vector<std::uint8_t> out(1000);
   std::uint64_t wins = 0;
   for (std::uint32_t slot = 0; slot < 1000; ++slot) {
      lottery_batch(0x1234, slot, t, 0, out);
      for (auto w : out)
         wins += w;
   }
   const double rate = static_cast<double>(wins) / 1e6;
   CHECK(rate == doctest::Approx(0.01).epsilon(0.03));
}

TEST_CASE("last_index_where: scalar and avx2 agree with a naive scan")
{
   std::mt19937_64 rng(5);
   for (int round = 0; round < 500; ++round) {
      const std::size_t size = 1 + rng() % 90;
      std::vector<std::int32_t> x1(size), x2(size);
      for (std::size_t i = 0; i < size; ++i) {
         x1[i] = static_cast<std::int32_t>(rng() % 20);
         x2[i] = static_cast<std::int32_t>(rng() % 20);
      }
      const std::size_t begin = rng() % size;
      const std::size_t end = begin + rng() % (size - begin + 1);
      const auto a0 = static_cast<std::int32_t>(rng() % 20);
      const auto d0 = static_cast<std::int32_t>(rng() % 20) - 10;
      const auto ref = naive_last_index(x1, x2, begin, end, a0, d0);
      CHECK(scalar::last_index_where(x1.data(), x2.data(), begin, end, a0, d0) == ref);
      if (avx2_supported())
         CHECK(avx2::last_index_where(x1.data(), x2.data(), begin, end, a0, d0) == ref);
      CHECK(last_index_where(x1, x2, begin, end, a0, d0) == ref);
   }
}

TEST_CASE("isa override forces the scalar path")
{
   set_isa_override(isa::scalar);
   CHECK(active_isa() == isa::scalar);
   clear_isa_override();
   CHECK(active_isa() == (avx2_supported() ? isa::avx2 : isa::scalar));
}
