#include <accgadget/bft.hpp>

#include <support/oracles.hpp>

#include <doctest.h>

using namespace accgadget;
using namespace accgadget::testing;

namespace {

BftConfig four_nodes(std::uint64_t seed)
{
   BftConfig cfg;
   cfg.n = 4;
   cfg.q_bft = 3;
   cfg.delta = 1;
   cfg.epoch_len = 3;
   cfg.seed = seed;
   return cfg;
}

} // namespace

TEST_CASE("BftConfig defaults and validation")
{
   const auto cfg = BftConfig::defaults(10, 3, 2, 1);
   CHECK(cfg.q_bft == 7);
   CHECK(cfg.epoch_len == 6);
   CHECK(BftConfig::defaults(10, 3, 0, 1).epoch_len == 1);
   BftConfig bad = cfg;
   bad.q_bft = 5;
   CHECK_THROWS_AS(bad.validate(), config_invalid);
}

TEST_CASE("four honest replicas order every submitted payload identically")
{
   bft_partitions net(four_nodes(5), 5);
   for (NodeId v = 0; v < 4; ++v)
      net.add(v, 0);
   const Signer& s = net.signer();
   std::vector<CheckpointVote> payloads;
   for (NodeId v = 0; v < 4; ++v)
      payloads.push_back(s.make(vote_kind::accept, 0, BlockId {0x10}, v));
   for (const auto& p : payloads)
      net.submit(0, p);
   net.run(80);

   const auto reference = net.replica(0).evidence().log_payloads();
   CHECK(reference.size() == payloads.size());
   for (std::size_t i = 0; i < 4; ++i) {
      CHECK(net.replica(i).evidence().log_payloads() == reference);
      CHECK(net.replica(i).log_digest() == net.replica(0).log_digest());
      CHECK(net.replica(i).finalized_height() > 0);
      CHECK(net.replica(i).pending_count() == 0);
      CHECK_NOTHROW(verify_bft_evidence(net.replica(i).evidence(), 4, 3, s));
   }
}

TEST_CASE("duplicate payloads are ordered once")
{
   bft_partitions net(four_nodes(6), 6);
   for (NodeId v = 0; v < 4; ++v)
      net.add(v, 0);
   const auto vote = net.signer().make(vote_kind::reject, 2, std::nullopt, 1);
   net.submit(0, vote);
   net.submit(0, vote);
   CHECK(net.replica(0).pending_count() == 1);
   net.run(60);
   net.submit(0, vote);
   net.run(30);
   CHECK(net.replica(0).evidence().log_payloads() == std::vector<CheckpointVote> {vote});
}

TEST_CASE("a paused replica freezes its epoch clock")
{
   const auto cfg = four_nodes(7);
   BftReplica r(cfg, 0, Signer(7));
   CHECK(r.epoch_at(9) == r.epoch_at(0) + 3);
   r.pause(true, 3);
   CHECK(r.paused());
   const auto frozen = r.epoch_at(3);
   CHECK(r.epoch_at(30) == frozen);
   r.pause(false, 30);
   CHECK(r.epoch_at(33) == frozen + 1);
}

TEST_CASE("split-brain finalization convicts exactly the double-voting replicas")
{
   for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const auto [e0, e1] = scripted_bft_split(seed);
      REQUIRE(payload_logs_conflict(e0.log_payloads(), e1.log_payloads()));
      const Signer signer(seed);
      CHECK_NOTHROW(verify_bft_evidence(e0, 4, 3, signer));
      CHECK_NOTHROW(verify_bft_evidence(e1, 4, 3, signer));
      CHECK(bft_forensics(e0, e1, 3) == std::vector<NodeId> {2, 3});
      for (const auto& v : bft_violations(e0, e1, 3)) {
         CHECK(v.first.signer == v.node);
         CHECK(v.second.signer == v.node);
         CHECK(v.first != v.second);
      }
   }
}

TEST_CASE("prefix-related logs are not a conflict")
{
   const auto [e0, e1] = scripted_bft_split(3);
   CHECK_THROWS_AS(bft_forensics(e0, e0, 3), not_conflicting);
   CHECK_FALSE(payload_logs_conflict(e0.log_payloads(), e0.log_payloads()));
   CHECK_FALSE(payload_logs_conflict({}, e1.log_payloads()));
}

TEST_CASE("tampered evidence is rejected")
{
   const auto [e0, e1] = scripted_bft_split(2);
   REQUIRE(e0.chain.size() > 1);
   auto forged = e0;
   forged.chain.back().qc.signatures.front() ^= 1;
   CHECK_THROWS_AS(verify_bft_evidence(forged, 4, 3, Signer(2)), evidence_invalid);
   CHECK_THROWS_AS(verify_bft_evidence(e0, 4, 3, Signer(99)), evidence_invalid);
}
