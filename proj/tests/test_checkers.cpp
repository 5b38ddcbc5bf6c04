#include <accgadget/checkers.hpp>

#include <doctest.h>

#include <cmath>
#include <set>

using namespace accgadget;

namespace {

Scenario small_scenario(std::uint64_t seed, strategy_kind strategy = strategy_kind::none)
{
   Scenario s;
   s.chain.n = 10;
   s.chain.f = 2;
   s.chain.p = 0.02;
   s.chain.delta = 1;
   s.chain.k = 4;
   s.chain.k_cp = 4;
   s.gadget.T_checkpoint = 40;
   s.gadget.T_timeout = 8;
   s.apply_preset();
   s.strategy = strategy;
   if (strategy != strategy_kind::none)
      s.adversarial = {8, 9};
   s.tx_rate = 0.5;
   s.horizon = 400;
   s.seed = seed;
   return resolve_scenario(s);
}

/// A trace holding only lottery wins, for the slot-level analyzers.
Trace wins_only(Slot horizon, Slot delta, std::vector<WinRow> wins)
{
   Trace t;
   t.scenario.chain.n = 4;
   t.scenario.chain.delta = delta;
   t.scenario.adversarial = {3};
   t.scenario.horizon = horizon;
   t.store = std::make_shared<BlockStore>();
   t.wins = std::move(wins);
   return t;
}

/// Direct evaluation of the convergence-opportunity definition.
std::int64_t naive_opportunities(const Trace& t)
{
   std::int64_t count = 0;
   for (Slot s = 0; s < t.horizon(); ++s) {
      int here = 0;
      int near = 0;
      bool good = false;
      for (const auto& w : t.wins) {
         if (w.slot == s) {
            ++here;
            good = !w.adversarial && w.awake;
         } else if (std::abs(w.slot - s) <= t.scenario.chain.delta) {
            ++near;
         }
      }
      count += here == 1 && good && near == 0;
   }
   return count;
}

} // namespace

TEST_CASE("gap: spacing below T_checkpoint is flagged, exactly T_checkpoint passes")
{
   const BlockId b {1};
   const std::vector<CheckpointEvent> tight {{0, b, 100}, {1, b, 159}};
   const std::vector<CheckpointEvent> exact {{0, b, 100}, {1, b, 160}};
   const auto bad = check_gap(tight, 60);
   CHECK_FALSE(bad.ok);
   CHECK(bad.first_violation == Slot {159});
   CHECK(check_gap(exact, 60).ok);
   CHECK(check_gap({}, 60).ok);
}

TEST_CASE("convergence opportunities follow the definition")
{
   SUBCASE("every slot one honest winner, delta 0")
   {
      std::vector<WinRow> wins;
      for (Slot s = 0; s < 50; ++s)
         wins.push_back({s, static_cast<NodeId>(s % 3), false, true});
      const auto t = wins_only(50, 0, wins);
      CHECK(count_convergence_opportunities(t, 0, 49, false, 0) == 50);
      CHECK(count_convergence_opportunities(t, 10, 19, false, 0) == 10);
   }
   SUBCASE("multiple winners, neighbours, adversarial and asleep winners")
   {
      const std::vector<WinRow> wins {
         {5, 0, false, true},  {10, 0, false, true}, {11, 1, false, true}, {20, 0, false, true},
         {20, 1, false, true}, {30, 3, true, true},  {40, 2, false, false}, {50, 1, false, true},
         {52, 2, false, true},
      };
      const auto t = wins_only(60, 1, wins);
      const auto co = convergence_opportunities(t);
      CHECK(co[5] == 1);
      CHECK(co[10] == 0);
      CHECK(co[20] == 0);
      CHECK(co[30] == 0);
      CHECK(co[40] == 0);
      CHECK(co[50] == 1);
      CHECK(co[52] == 1);
      CHECK(count_convergence_opportunities(t, 0, 59, false, 0) == naive_opportunities(t));
   }
   SUBCASE("simulated runs")
   {
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
         const Trace t = run(small_scenario(seed, strategy_kind::selfish_boycott));
         CHECK(count_convergence_opportunities(t, 0, t.horizon() - 1, false, 0) == naive_opportunities(t));
      }
   }
}

TEST_CASE("pivots: fast scan matches the direct evaluation")
{
   for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      Scenario s = small_scenario(seed, strategy_kind::selfish_boycott);
      s.horizon = 250;
      const Trace t = run(s);
      const Slot T_recent = s.chain.delta + s.gadget.T_timeout + measure_bft_confirm(t);
      CHECK(analyze_pivots(t, T_recent) == analyze_pivots_naive(t, T_recent));
      CHECK(analyze_pivots(t, 0) == analyze_pivots_naive(t, 0));
   }
}

TEST_CASE("pivots: no adversarial wins makes every slot a pivot")
{
   Scenario s = small_scenario(5);
   s.horizon = 200;
   const Trace t = run(s);
   CHECK(analyze_pivots(t, 20).size() == static_cast<std::size_t>(s.horizon));
}

TEST_CASE("pivots: no pivot inside a dense adversarial burst")
{
   std::vector<WinRow> wins;
   for (Slot s = 0; s < 200; s += 7)
      wins.push_back({s, 0, false, true});
   for (Slot s = 100; s < 130; ++s)
      wins.push_back({s, 3, true, true});
   const auto t = wins_only(200, 1, wins);
   const auto pivots = analyze_pivots(t, 0);
   CHECK(pivots == analyze_pivots_naive(t, 0));
   for (Slot p : pivots)
      CHECK((p < 100 || p >= 130));
}

TEST_CASE("fault-free run passes every check")
{
   const Trace t = run(small_scenario(2));
   const SecurityReport r = check_all(t);
   CHECK(r.safety_da.ok);
   CHECK(r.safety_acc.ok);
   CHECK(r.safety_bft.ok);
   CHECK(r.liveness_da.ok);
   CHECK(r.liveness_acc.ok);
   CHECK(r.prefix.ok);
   CHECK(r.gap.ok);
   CHECK(r.recency.ok);
   CHECK(r.all_ok());

   const Metrics m = measure_metrics(t);
   REQUIRE(m.checkpoints > 0);
   CHECK(m.accept_votes_min >= t.scenario.gadget.q_accept);
   CHECK(m.accept_votes_max <= t.scenario.chain.n);
   CHECK(m.adversarial_blocks == 0);
   CHECK(m.chain_quality == 1.0);
}

TEST_CASE("an implanted conflicting ledger is caught at the slot it appears")
{
   Trace t = run(small_scenario(3));
   Block rogue;
   rogue.parent = make_genesis().id;
   rogue.producer = 0;
   rogue.slot = 1;
   rogue.payload = {999999};
   rogue.id = compute_block_id(rogue.parent, rogue.producer, rogue.slot, rogue.payload);
   const BlockIndex r = t.store->add(rogue);
   t.blocks.push_back({1, 0, false});
   for (Slot s = 200; s < t.horizon(); ++s) {
      auto& row = t.rows[static_cast<std::size_t>(s) * t.n()];
      row.tip = row.da_end = r;
      row.acc_end = 0;
   }
   const auto res = check_safety(t, ledger_kind::da);
   CHECK_FALSE(res.ok);
   CHECK(res.first_violation == Slot {200});
   CHECK(check_safety(t, ledger_kind::acc).ok);
}

TEST_CASE("prefix check flags LOG_acc running ahead of LOG_da")
{
   Trace t = run(small_scenario(4));
   REQUIRE(check_prefix(t).ok);
   auto& row = t.rows[static_cast<std::size_t>(300) * t.n() + 1];
   row.acc_end = row.tip;
   row.da_end = 0;
   const auto res = check_prefix(t);
   CHECK_FALSE(res.ok);
   CHECK(res.first_violation == Slot {300});
}

TEST_CASE("liveness: too short a window fails, txs given to sleepers are exempt")
{
   const Trace t = run(small_scenario(6));
   CHECK_FALSE(check_liveness(t, ledger_kind::da, 1, 0).ok);
   CHECK(check_liveness(t, ledger_kind::da, 200, 0).ok);

   Scenario s = small_scenario(6);
   s.tx_rate = 0;
   s.sleep = {{7, 0, s.horizon}};
   s.tx_schedule = {{10, 7, 42}};
   s = resolve_scenario(s);
   const Trace quiet = run(s);
   CHECK(check_liveness(quiet, ledger_kind::da, 50, 0).ok);
}

TEST_CASE("equivocating super-threshold coalition breaks LOG_acc safety")
{
   Scenario s;
   s.chain.n = 10;
   s.chain.f = 3;
   s.chain.p = 0.03;
   s.chain.delta = 1;
   s.quorum_preset = "n-minus-f";
   s.apply_preset();
   s.adversarial = {6, 7, 8, 9};
   s.strategy = strategy_kind::equivocate;
   s.horizon = 600;
   s.seed = 1;
   const Trace t = run(resolve_scenario(s));
   const auto res = check_safety(t, ledger_kind::acc);
   CHECK_FALSE(res.ok);
   REQUIRE(res.first_violation);
   CHECK(*res.first_violation > 0);
   CHECK(*res.first_violation < s.horizon);
}

TEST_CASE("single-node run is trivially safe")
{
   Scenario s;
   s.chain.n = 1;
   s.chain.f = 0;
   s.chain.p = 0.1;
   s.apply_preset();
   s.horizon = 200;
   const Trace t = run(resolve_scenario(s));
   CHECK(check_safety(t, ledger_kind::da).ok);
   CHECK(check_safety(t, ledger_kind::acc).ok);
   CHECK(check_safety(t, ledger_kind::bft).ok);
}

TEST_CASE("empty trace gives zeroed metrics")
{
   const Metrics m = measure_metrics(Trace {});
   CHECK(m.checkpoints == 0);
   CHECK(m.acc_latency_mean == 0.0);
   CHECK(m.votes_per_iteration == 0.0);
}

TEST_CASE("parameter inequality")
{
   ChainParams c;
   c.n = 100;
   c.f = 25;
   c.delta = 2;
   c.p = 0.8 / (3.0 * 100 * 2);
   GadgetParams g = GadgetParams::two_thirds(100);
   g.T_timeout = 60;
   g.T_checkpoint = 30000;

   const auto pc = validate_params(c, g, 0);
   CHECK(pc.p_bound == doctest::Approx(50.0 / 30000.0));
   CHECK(pc.alpha == doctest::Approx(c.p * 75));
   CHECK(pc.beta == doctest::Approx(c.p * 25));
   // T_recent = Δ + T_timeout = 62; margin of the rate inequality is 1/187.5 per slot.
   CHECK(pc.min_T_checkpoint == doctest::Approx(93.75 * (62 + 2 * 2 + 1) * 2));
   CHECK(pc.ok);
   g.T_checkpoint = 12000;
   CHECK_FALSE(validate_params(c, g, 0).ok);

   CHECK(worked_checkpoint_bound(60, 2) == doctest::Approx(25200));
   CHECK(worked_checkpoint_bound(60, 2) >= pc.min_T_checkpoint);

   c.p = 0;
   const auto zero = validate_params(c, g, 0);
   CHECK_FALSE(zero.ok);
   CHECK(zero.alpha == 0.0);
}

TEST_CASE("latency and vote models")
{
   const double acc = acc_latency_model(6, 12, 300);
   const double gasper = gasper_latency_model(32, 12);
   CHECK(acc == doctest::Approx(222));
   CHECK(gasper == doctest::Approx(960));
   CHECK(gasper / acc >= 4.0);
   CHECK(votes_per_checkpoint_model(100) == doctest::Approx(500));
}
