#pragma once
// Independent reference implementations and scripted harnesses shared by
// the unit tests and the acceptance binary.

#include <accgadget/adjudication.hpp>
#include <accgadget/bft.hpp>
#include <accgadget/chain.hpp>
#include <accgadget/gadget.hpp>

#include <algorithm>
#include <deque>
#include <optional>
#include <random>
#include <vector>

namespace accgadget::testing {

/// Inserts a child of `parent` into `tree` and returns its index.
inline BlockIndex add_child(BlockTree& tree, BlockIndex parent, NodeId producer, Slot slot, std::vector<TxId> payload = {})
{
   const BlockStore& s = tree.store();
   Block b;
   b.parent = s.block(parent).id;
   b.producer = producer;
   b.slot = slot;
   b.payload = std::move(payload);
   b.id = compute_block_id(b.parent, b.producer, b.slot, b.payload);
   return tree.insert(b);
}

/// Appends `count` blocks above `from`, one per slot, each carrying one tx
/// equal to `tx_base` plus its height. Returns the new tip.
inline BlockIndex extend(BlockTree& tree, BlockIndex from, std::int64_t count, NodeId producer = 0, TxId tx_base = 0)
{
   BlockIndex tip = from;
   for (std::int64_t i = 0; i < count; ++i) {
      const auto& s = tree.store();
      const auto h = s.height(tip) + 1;
      tip = add_child(tree, tip, producer, s.block(tip).slot + 1, {tx_base + static_cast<TxId>(h)});
   }
   return tip;
}

/// Blocks from genesis to `tip`.
inline std::vector<Block> blocks_to(const BlockStore& s, BlockIndex tip)
{
   std::vector<Block> out;
   for (BlockIndex b : chain_to(s, tip))
      out.push_back(s.block(b));
   return out;
}

/// Block ids from genesis to `tip`, walking parent links.
inline std::vector<BlockId> path_ids(const BlockStore& s, BlockIndex tip)
{
   std::vector<BlockId> out;
   for (BlockIndex b = tip;; b = s.parent(b)) {
      out.push_back(s.block(b).id);
      if (b == 0)
         break;
   }
   std::reverse(out.begin(), out.end());
   return out;
}

/// Enumerates every chain genesis..b over known blocks, keeps those holding
/// every non-bottom checkpoint, returns the longest (smallest tip id on
/// ties). Empty when no chain holds them all.
inline std::optional<std::vector<BlockId>> brute_force_fork_choice(const BlockTree& tree,
                                                                   const std::vector<CheckpointDecision>& cps)
{
   std::optional<std::vector<BlockId>> best;
   for (BlockIndex b : tree.known_blocks()) {
      const auto path = path_ids(tree.store(), b);
      bool holds_all = true;
      for (const auto& d : cps)
         if (d.block && std::find(path.begin(), path.end(), *d.block) == path.end())
            holds_all = false;
      if (!holds_all)
         continue;
      if (!best || path.size() > best->size() || (path.size() == best->size() && path.back() < best->back()))
         best = path;
   }
   return best;
}

struct random_tree
{
   BlockTree                       tree;
   std::vector<CheckpointDecision> checkpoints;
};

/// Up to `max_blocks` blocks (genesis included) with uniformly random
/// parents, and up to two checkpoints (possibly bottom, possibly conflicting).
inline random_tree make_random_tree(std::mt19937_64& rng, std::size_t max_blocks)
{
   random_tree out;
   std::uniform_int_distribution<std::size_t> size_dist(1, max_blocks);
   const std::size_t size = size_dist(rng);
   std::vector<BlockIndex> blocks {0};
   for (std::size_t i = 1; i < size; ++i) {
      const BlockIndex parent = blocks[std::uniform_int_distribution<std::size_t>(0, blocks.size() - 1)(rng)];
      const Slot slot = out.tree.store().block(parent).slot + 1 + static_cast<Slot>(rng() % 3);
      blocks.push_back(add_child(out.tree, parent, static_cast<NodeId>(rng() % 8), slot,
                                 {static_cast<TxId>(rng() % 20)}));
   }
   const std::size_t count = rng() % 3;
   for (std::size_t c = 0; c < count; ++c) {
      CheckpointDecision d;
      d.iteration = static_cast<Iteration>(c);
      if (rng() % 4 != 0)
         d.block = out.tree.store().block(blocks[rng() % blocks.size()]).id;
      out.checkpoints.push_back(d);
   }
   return out;
}

/// Replicas of a Streamlet-style ordering service wired into partitions.
/// Every replica belongs to one partition; messages reach the other members
/// of the sender's partition one slot later.
class bft_partitions
{
public:
   bft_partitions(BftConfig cfg, std::uint64_t seed) : cfg_(cfg), signer_(seed) {}

   std::size_t add(NodeId node, int partition)
   {
      replicas_.push_back({BftReplica(cfg_, node, signer_), partition});
      return replicas_.size() - 1;
   }

   BftReplica& replica(std::size_t i) { return replicas_[i].r; }
   const Signer& signer() const { return signer_; }

   void submit(int partition, const CheckpointVote& v)
   {
      for (auto& e : replicas_)
         if (e.partition == partition)
            e.r.submit(v);
   }

   void run(Slot slots)
   {
      for (Slot end = now_ + slots; now_ < end; ++now_) {
         std::deque<in_flight> due;
         due.swap(next_);
         for (auto& m : due)
            route(m.to, replicas_[m.to].r.receive(m.msg, now_));
         for (std::size_t i = 0; i < replicas_.size(); ++i)
            route(i, replicas_[i].r.tick(now_));
      }
   }

private:
   struct entry
   {
      BftReplica r;
      int        partition;
   };
   struct in_flight
   {
      std::size_t from;
      std::size_t to;
      BftMessage  msg;
   };

   void route(std::size_t from, const BftOutput& out)
   {
      for (const auto& m : out.outbound)
         for (std::size_t to = 0; to < replicas_.size(); ++to)
            if (to != from && replicas_[to].partition == replicas_[from].partition)
               next_.push_back({from, to, m});
   }

   BftConfig              cfg_;
   Signer                 signer_;
   std::vector<entry>     replicas_;
   std::deque<in_flight>  next_;
   Slot                   now_ {0};
};

/// n = 4, q_bft = 3: honest 0 and 1 in separate partitions, nodes 2 and 3
/// run one replica in each. Partition 0 orders `a`, partition 1 orders `b`
/// (one accept each from nodes 0 and 1 when empty). Returns the evidences of
/// nodes 0 and 1.
inline std::pair<BftEvidence, BftEvidence> scripted_bft_split(std::uint64_t seed, std::vector<CheckpointVote> a = {},
                                                              std::vector<CheckpointVote> b = {}, Slot slots = 120)
{
   BftConfig cfg;
   cfg.n = 4;
   cfg.q_bft = 3;
   cfg.delta = 1;
   cfg.epoch_len = 3;
   cfg.seed = seed;
   bft_partitions net(cfg, seed);
   const auto honest_a = net.add(0, 0);
   net.add(2, 0);
   net.add(3, 0);
   const auto honest_b = net.add(1, 1);
   net.add(2, 1);
   net.add(3, 1);
   if (a.empty())
      a.push_back(net.signer().make(vote_kind::accept, 0, BlockId {0xa}, 0));
   if (b.empty())
      b.push_back(net.signer().make(vote_kind::accept, 0, BlockId {0xb}, 1));
   for (const auto& v : a)
      net.submit(0, v);
   for (const auto& v : b)
      net.submit(1, v);
   net.run(slots);
   return {net.replica(honest_a).evidence(), net.replica(honest_b).evidence()};
}

/// Two full evidences from the split above: each partition checkpoints its
/// own branch with accepts from its honest node plus nodes 2 and 3, and
/// carries that branch as its chain.
inline std::pair<Evidence, Evidence> scripted_split_evidence(std::uint64_t seed)
{
   BlockTree tree;
   const BlockIndex a = extend(tree, 0, 8, 0, 1000);
   const BlockIndex b = extend(tree, 0, 8, 1, 2000);
   const BlockId cp_a = tree.store().block(tree.store().ancestor_at(a, 2)).id;
   const BlockId cp_b = tree.store().block(tree.store().ancestor_at(b, 2)).id;
   const Signer s(seed);
   std::vector<CheckpointVote> va, vb;
   for (NodeId v : {0U, 2U, 3U})
      va.push_back(s.make(vote_kind::accept, 0, cp_a, v));
   for (NodeId v : {1U, 2U, 3U})
      vb.push_back(s.make(vote_kind::accept, 0, cp_b, v));
   const auto [e0, e1] = scripted_bft_split(seed, va, vb);

   auto make = [&](NodeId node, const BftEvidence& e, BlockIndex tip) {
      Evidence w;
      w.node = node;
      w.at_slot = 120;
      w.bft_evidence = e;
      w.vote_transcript = e.log_payloads();
      w.chain = blocks_to(tree.store(), tip);
      w.k = 6;
      return w;
   };
   return {make(0, e0, a), make(1, e1, b)};
}

} // namespace accgadget::testing
