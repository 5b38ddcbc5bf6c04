#include <accgadget/gadget.hpp>

#include <support/oracles.hpp>

#include <doctest.h>

#include <map>
#include <random>

using namespace accgadget;
using namespace accgadget::testing;

namespace {

constexpr std::uint64_t seed = 41;

std::vector<GeneratorAction> votes_of(const std::vector<GeneratorAction>& actions)
{
   std::vector<GeneratorAction> out;
   for (const auto& a : actions)
      if (a.what == GeneratorAction::type::submit_vote)
         out.push_back(a);
   return out;
}

/// A view over a single chain of `length` blocks above genesis.
struct linear_view
{
   BlockTree tree;
   BlockIndex tip;
   ChainView view;

   explicit linear_view(std::int64_t length)
      : tip(extend(tree, 0, length)), view(tree.shared_store())
   {
      for (BlockIndex b : tree.known_blocks())
         view.receive(b);
   }
   BlockId id_at(std::int64_t h) const { return tree.store().block(tree.store().ancestor_at(tip, h)).id; }
};

NodeId non_leader(Iteration c, std::uint32_t n)
{
   return (cp_leader_of_iter(c, n, seed) + 1) % n;
}

} // namespace

TEST_CASE("signatures bind every field")
{
   const Signer s(seed);
   const auto v = s.make(vote_kind::accept, 3, BlockId {9}, 2);
   CHECK(s.verify(v));
   auto forged = v;
   forged.author = 1;
   CHECK_FALSE(s.verify(forged));
   forged = v;
   forged.iteration = 4;
   CHECK_FALSE(s.verify(forged));
   CHECK_FALSE(Signer(seed + 1).verify(v));
   CHECK_FALSE(s.make(vote_kind::reject, 0, BlockId {1}, 0).well_formed());
}

TEST_CASE("cp_leader_of_iter")
{
   for (Iteration c = 0; c < 20; ++c)
      CHECK(cp_leader_of_iter(c, 1, seed) == 0);
   for (Iteration c = 0; c < 10; ++c)
      CHECK(cp_leader_of_iter(c, 4, seed) == cp_leader_of_iter(c, 4, seed));

   std::map<NodeId, int> counts;
   constexpr int iterations = 100000;
   for (Iteration c = 0; c < iterations; ++c)
      ++counts[cp_leader_of_iter(c, 5, seed)];
   REQUIRE(counts.size() == 5);
   for (const auto& [node, count] : counts)
      CHECK(std::abs(static_cast<double>(count) / iterations - 0.2) <= 0.01);
}

TEST_CASE("quorum presets")
{
   const auto a = GadgetParams::two_thirds(3);
   CHECK(a.q_accept == 2);
   CHECK(a.q_reject == 2);
   const auto b = GadgetParams::literal(3);
   CHECK(b.q_accept == 2);
   CHECK(b.q_reject == 1);
   const auto c = GadgetParams::n_minus_f(10, 3);
   CHECK(c.q_accept == 7);
   CHECK(c.q_reject == 4);
   CHECK_NOTHROW(GadgetParams::two_thirds(100).validate(100));

   GadgetParams bad = a;
   bad.q_accept = 1;
   CHECK_THROWS_AS(bad.validate(3), config_invalid);
}

TEST_CASE("interpreter: accept quorum, reject quorum, empty stream")
{
   const Signer s(seed);
   const BlockId b {0xb};
   const auto params = GadgetParams::two_thirds(3);

   auto r1 = interpreter_step({}, s.make(vote_kind::accept, 0, b, 1), params);
   CHECK_FALSE(r1.decision);
   auto r2 = interpreter_step(r1.state, s.make(vote_kind::accept, 0, b, 2), params);
   REQUIRE(r2.decision);
   CHECK(r2.decision->iteration == 0);
   CHECK(r2.decision->block == b);
   CHECK(r2.state.curr_iter == 1);

   const auto literal = GadgetParams::literal(3);
   auto r3 = interpreter_step({}, s.make(vote_kind::reject, 0, std::nullopt, 1), literal);
   REQUIRE(r3.decision);
   CHECK_FALSE(r3.decision->block);
   CHECK_FALSE(interpreter_step({}, s.make(vote_kind::reject, 0, std::nullopt, 1), params).decision);

   CHECK(replay_votes({}, params).empty());
}

TEST_CASE("interpreter: latest vote counts, other iterations ignored")
{
   const Signer s(seed);
   const BlockId b {0xb};
   const auto params = GadgetParams::two_thirds(3);
   const std::vector<CheckpointVote> log {
      s.make(vote_kind::accept, 0, b, 1),
      s.make(vote_kind::reject, 0, std::nullopt, 1),
      s.make(vote_kind::accept, 1, b, 0),
      s.make(vote_kind::accept, 0, b, 2),
      s.make(vote_kind::propose, 0, b, 0),
   };
   CHECK(replay_votes(log, params).empty());

   auto extended = log;
   extended.push_back(s.make(vote_kind::reject, 0, std::nullopt, 0));
   const auto d = replay_votes(extended, params);
   REQUIRE(d.size() == 1);
   CHECK_FALSE(d[0].block);
}

TEST_CASE("ledger_acc")
{
   linear_view lv(20);
   CHECK(ledger_acc({}, lv.tree).empty());

   const std::vector<CheckpointDecision> one {{0, lv.id_at(8), 0}};
   CHECK(ledger_acc(one, lv.tree) == lv.tree.store().ledger(lv.tree.store().ancestor_at(lv.tip, 8)));
   CHECK(ledger_acc(one, lv.tree).size() == 8);

   const std::vector<CheckpointDecision> three {{0, lv.id_at(8), 0}, {1, std::nullopt, 0}, {2, lv.id_at(14), 0}};
   CHECK(ledger_acc(three, lv.tree).size() == 14);

   BlockTree& tree = lv.tree;
   const BlockIndex side = extend(tree, 0, 3, 9);
   const std::vector<CheckpointDecision> clash {{0, lv.id_at(8), 0}, {1, tree.store().block(side).id, 0}};
   CHECK_THROWS_AS(ledger_acc(clash, tree), conflicting_checkpoints);
}

TEST_CASE("is_valid_proposal")
{
   linear_view lv(10);
   const NodeId leader = cp_leader_of_iter(0, 4, seed);
   const Signer s(seed);
   CHECK(is_valid_proposal(s.make(vote_kind::propose, 0, lv.id_at(4), leader), lv.view, 6));
   CHECK(is_valid_proposal(s.make(vote_kind::propose, 0, lv.id_at(2), leader), lv.view, 6));
   CHECK_FALSE(is_valid_proposal(s.make(vote_kind::propose, 0, lv.id_at(9), leader), lv.view, 6));

   const BlockIndex side = extend(lv.tree, 0, 2, 7);
   lv.view.receive(lv.tree.store().parent(side));
   lv.view.receive(side);
   CHECK_FALSE(is_valid_proposal(s.make(vote_kind::propose, 0, lv.tree.store().block(side).id, leader), lv.view, 1));

   lv.view.apply_checkpoint({0, lv.id_at(3), 0});
   CHECK_FALSE(is_valid_proposal(s.make(vote_kind::propose, 1, lv.id_at(2), leader), lv.view, 6));
   CHECK(is_valid_proposal(s.make(vote_kind::propose, 1, lv.id_at(4), leader), lv.view, 6));
}

TEST_CASE("generator: leader proposes its k_cp-deep block")
{
   linear_view lv(3);
   const Signer s(seed);
   GeneratorConfig cfg {cp_leader_of_iter(0, 4, seed), 4, seed, 6, GadgetParams::two_thirds(4), false};
   const auto out = generator_step({}, GeneratorEvent::tick(0), lv.view, cfg, s);
   REQUIRE(out.actions.size() == 2);
   CHECK(out.actions[0].what == GeneratorAction::type::broadcast_proposal);
   CHECK(out.actions[0].vote.block == make_genesis().id);
   CHECK(out.actions[1].vote.kind == vote_kind::accept);
   CHECK(out.actions[1].vote.block == make_genesis().id);

   cfg.silent_leader = true;
   CHECK(generator_step({}, GeneratorEvent::tick(0), lv.view, cfg, s).actions.empty());
}

TEST_CASE("generator: accept on a valid proposal, reject on timeout or an invalid one")
{
   linear_view lv(10);
   const Signer s(seed);
   const NodeId leader = cp_leader_of_iter(0, 4, seed);
   GeneratorConfig cfg {non_leader(0, 4), 4, seed, 6, GadgetParams::two_thirds(4), false};
   cfg.gadget.T_timeout = 12;

   auto st = generator_step({}, GeneratorEvent::tick(0), lv.view, cfg, s);
   CHECK(st.actions.empty());
   auto acc = generator_step(st.state, GeneratorEvent::on_proposal(5, s.make(vote_kind::propose, 0, lv.id_at(4), leader)),
                             lv.view, cfg, s);
   REQUIRE(acc.actions.size() == 1);
   CHECK(acc.actions[0].vote == s.make(vote_kind::accept, 0, lv.id_at(4), cfg.self));
   const auto late = votes_of(generator_step(acc.state, GeneratorEvent::tick(12), lv.view, cfg, s).actions);
   REQUIRE(late.size() == 1);
   CHECK(late[0].vote.kind == vote_kind::reject);

   auto quiet = generator_step(st.state, GeneratorEvent::tick(11), lv.view, cfg, s);
   CHECK(quiet.actions.empty());
   auto timeout = generator_step(quiet.state, GeneratorEvent::tick(12), lv.view, cfg, s);
   REQUIRE(timeout.actions.size() == 1);
   CHECK(timeout.actions[0].vote == s.make(vote_kind::reject, 0, std::nullopt, cfg.self));

   auto bad = generator_step(st.state, GeneratorEvent::on_proposal(3, s.make(vote_kind::propose, 0, lv.id_at(9), leader)),
                             lv.view, cfg, s);
   REQUIRE(bad.actions.size() == 1);
   CHECK(bad.actions[0].vote.kind == vote_kind::reject);

   auto impostor = generator_step(
      st.state, GeneratorEvent::on_proposal(3, s.make(vote_kind::propose, 0, lv.id_at(4), non_leader(0, 4))), lv.view, cfg, s);
   CHECK(impostor.actions.empty());
}

TEST_CASE("generator: waits T_checkpoint after a non-bottom decision")
{
   linear_view lv(10);
   const Signer s(seed);
   GeneratorConfig cfg {non_leader(1, 4), 4, seed, 6, GadgetParams::two_thirds(4), false};
   cfg.gadget.T_checkpoint = 60;
   cfg.gadget.T_timeout = 12;
   auto st = generator_step({}, GeneratorEvent::tick(0), lv.view, cfg, s).state;
   lv.view.apply_checkpoint({0, lv.id_at(2), 5});
   st = generator_step(st, GeneratorEvent::on_decision(5, {0, lv.id_at(2), 5}), lv.view, cfg, s).state;
   CHECK(st.curr_iter == 1);
   CHECK(st.phase == generator_phase::waiting_checkpoint);
   CHECK(generator_step(st, GeneratorEvent::tick(64), lv.view, cfg, s).state.phase == generator_phase::waiting_checkpoint);
   st = generator_step(st, GeneratorEvent::tick(65), lv.view, cfg, s).state;
   CHECK(st.phase == generator_phase::awaiting_proposal);
   const auto out = generator_step(st, GeneratorEvent::tick(65 + 12), lv.view, cfg, s);
   REQUIRE(out.actions.size() == 1);
   CHECK(out.actions[0].vote.kind == vote_kind::reject);
   CHECK(out.actions[0].vote.iteration == 1);

   auto after_bot = generator_step({}, GeneratorEvent::on_decision(0, {0, std::nullopt, 0}), lv.view, cfg, s).state;
   CHECK(after_bot.phase == generator_phase::awaiting_proposal);
}

TEST_CASE("generator: one accept per iteration, never an accept after a reject")
{
   linear_view lv(12);
   const Signer s(seed);
   std::mt19937_64 rng(8);
   for (NodeId self = 0; self < 4; ++self) {
      GeneratorConfig cfg {self, 4, seed, 6, GadgetParams::two_thirds(4), false};
      GeneratorState st;
      std::map<Iteration, int> accepts;
      std::map<Iteration, bool> rejected;
      Iteration decided = 0;
      for (Slot now = 0; now < 2000; ++now) {
         GeneratorEvent ev = GeneratorEvent::tick(now);
         const auto r = rng() % 10;
         if (r == 0) {
            const Iteration c = st.curr_iter + static_cast<Iteration>(rng() % 2);
            ev = GeneratorEvent::on_proposal(
               now, s.make(vote_kind::propose, c, lv.id_at(static_cast<std::int64_t>(rng() % 12)), cp_leader_of_iter(c, 4, seed)));
         } else if (r == 1) {
            ev = GeneratorEvent::on_decision(now, {decided++, std::nullopt, now});
         }
         auto out = generator_step(st, ev, lv.view, cfg, s);
         st = out.state;
         for (const auto& a : votes_of(out.actions)) {
            if (a.vote.kind == vote_kind::accept) {
               CHECK(++accepts[a.vote.iteration] == 1);
               CHECK_FALSE(rejected[a.vote.iteration]);
            } else {
               rejected[a.vote.iteration] = true;
            }
         }
      }
      CHECK(accepts.size() > 10);
   }
}
