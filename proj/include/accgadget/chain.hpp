#pragma once
// Lottery-based longest-chain protocol with a checkpoint-respecting fork
// choice and k-deep confirmation.

#include <accgadget/types.hpp>

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace accgadget {

struct Block
{
   BlockId                id;
   std::optional<BlockId> parent;   // absent for genesis
   NodeId                 producer {0};
   Slot                   slot {0};
   std::vector<TxId>      payload;

   bool operator==(const Block&) const = default;
};

BlockId compute_block_id(const std::optional<BlockId>& parent, NodeId producer, Slot slot,
                         std::span<const TxId> payload);
Block make_genesis();

struct ChainParams
{
   std::uint32_t n {1};
   std::uint32_t f {0};
   double        p {0.01};
   Slot          delta {1};
   std::int64_t  k {6};
   std::int64_t  k_cp {6};
   std::int64_t  sigma {6};

   /// Throws config_invalid naming the violated invariant.
   void validate() const;
};

/// Output of one checkpoint iteration; `block` empty means the iteration aborted.
struct CheckpointDecision
{
   Iteration              iteration {0};
   std::optional<BlockId> block;
   Slot                   decided_at {0};

   bool operator==(const CheckpointDecision&) const = default;
};

using BlockIndex = std::uint32_t;
inline constexpr BlockIndex no_block = static_cast<BlockIndex>(-1);

/// Append-only arena of every block ever created in a run. Holds the
/// ancestry index and per-block cumulative ledger bookkeeping, so that
/// ledgers are compared by digest instead of materialized.
class BlockStore
{
public:
   BlockStore();

   /// Adds a block whose parent is already stored; idempotent on id.
   BlockIndex add(Block block);

   std::size_t size() const { return blocks_.size(); }
   const Block& block(BlockIndex i) const { return blocks_[i]; }
   BlockIndex parent(BlockIndex i) const { return parent_[i]; }
   std::int64_t height(BlockIndex i) const { return height_[i]; }
   std::optional<BlockIndex> find(BlockId id) const;
   BlockIndex index_of(BlockId id) const;   // throws std::out_of_range

   /// True iff `a` is `b` or one of its ancestors.
   bool is_ancestor(BlockIndex a, BlockIndex b) const;
   BlockIndex ancestor_at(BlockIndex b, std::int64_t h) const;

   /// Deduplicated transaction ledger of the chain genesis..b.
   std::vector<TxId> ledger(BlockIndex b) const;
   std::uint64_t ledger_len(BlockIndex b) const { return ledger_len_[b]; }
   std::uint64_t ledger_digest(BlockIndex b) const { return digest_[b]; }
   std::span<const TxId> fresh_txs(BlockIndex b) const { return fresh_[b]; }
   std::uint64_t prefix_digest(BlockIndex b, std::uint64_t len) const;
   /// ledger(a) is a prefix of ledger(b).
   bool ledger_is_prefix(BlockIndex a, BlockIndex b) const;
   bool ledgers_conflict(BlockIndex a, BlockIndex b) const
   {
      return !ledger_is_prefix(a, b) && !ledger_is_prefix(b, a);
   }
   bool ledger_contains(BlockIndex b, TxId tx) const;

   static std::uint64_t fold_digest(std::uint64_t digest, TxId tx) { return hash_combine(digest, tx); }

private:
   static constexpr int levels = 20;

   std::vector<Block>                       blocks_;
   std::vector<BlockIndex>                  parent_;
   std::vector<std::int64_t>                height_;
   std::vector<std::array<BlockIndex, levels>> jump_;
   std::vector<std::uint64_t>               ledger_len_;
   std::vector<std::uint64_t>               digest_;
   std::vector<std::vector<TxId>>           fresh_;
   std::unordered_map<BlockId, BlockIndex>  by_id_;
   std::unordered_map<TxId, std::vector<BlockIndex>> tx_blocks_;
};

/// One node's view of the block tree: a subset of the shared store that is
/// closed under parents.
class BlockTree
{
public:
   BlockTree();   // fresh store holding genesis only
   explicit BlockTree(std::shared_ptr<BlockStore> store);

   /// Stores and marks known; the parent must already be known.
   BlockIndex insert(const Block& block);
   /// Marks a stored block known; returns false if its parent is unknown.
   bool learn(BlockIndex i);
   bool knows(BlockIndex i) const { return i < known_.size() && known_[i] != 0; }
   bool knows(BlockId id) const;

   const BlockStore& store() const { return *store_; }
   const std::shared_ptr<BlockStore>& shared_store() const { return store_; }
   std::span<const BlockIndex> known_blocks() const { return known_list_; }
   BlockIndex genesis() const { return 0; }

private:
   std::shared_ptr<BlockStore> store_;
   std::vector<std::uint8_t>   known_;
   std::vector<BlockIndex>     known_list_;
};

/// Ordered block indices from genesis to tip.
using Chain = std::vector<BlockIndex>;

bool leader_lottery(NodeId node, Slot slot, const ChainParams& params, std::uint64_t seed);

/// Deepest non-bottom checkpoint; throws conflicting_checkpoints when two
/// of them are not ancestor-related.
BlockIndex latest_checkpoint(const BlockTree& tree, std::span<const CheckpointDecision> checkpoints);

Chain fork_choice(const BlockTree& tree, std::span<const CheckpointDecision> checkpoints);
Chain chain_to(const BlockStore& store, BlockIndex tip);

/// Index of the block ending the available ledger for `chain`.
BlockIndex confirm_da_block(const BlockStore& store, const Chain& chain, std::optional<BlockIndex> latest_checkpoint,
                            std::int64_t k);
std::vector<TxId> confirm_da(const BlockStore& store, const Chain& chain, std::optional<BlockIndex> latest_checkpoint,
                             std::int64_t k);

Block produce_block(NodeId node, Slot slot, const BlockTree& tree, std::span<const CheckpointDecision> checkpoints,
                    std::span<const TxId> mempool);

bool validate_block(const Block& block, const BlockTree& tree, const ChainParams& params, std::uint64_t seed);

/// Incremental checkpoint-respecting fork choice used inside the simulator.
/// Equivalent to fork_choice() over the same view at every point.
class ChainView
{
public:
   explicit ChainView(std::shared_ptr<BlockStore> store);

   /// Learns a stored block, buffering it until its parent is known.
   void receive(BlockIndex i);
   /// Applies checkpoint decisions in arrival order; a decision whose block
   /// is unknown holds back all later ones. A checkpoint conflicting with
   /// the current one is recorded in conflicts() and otherwise ignored.
   void apply_checkpoint(const CheckpointDecision& d);
   const std::vector<CheckpointDecision>& conflicts() const { return conflicts_; }

   const BlockTree& tree() const { return tree_; }
   const BlockStore& store() const { return tree_.store(); }
   BlockIndex tip() const { return tip_; }
   BlockIndex checkpoint() const { return cp_; }
   bool has_checkpoint() const { return has_cp_; }
   bool has_pending_checkpoint() const { return !pending_.empty(); }
   const std::vector<CheckpointDecision>& checkpoints() const { return decisions_; }
   /// The k-deep (clamped to genesis) block on the selected chain.
   BlockIndex deep_block(std::int64_t depth) const;
   BlockIndex da_block(std::int64_t k) const;

private:
   void learn_recursive(BlockIndex i);
   void consider(BlockIndex i);
   void recompute_tip();
   void try_apply_pending();

   BlockTree                                           tree_;
   std::unordered_map<BlockIndex, std::vector<BlockIndex>> orphans_;
   std::vector<CheckpointDecision>                     decisions_;
   std::vector<CheckpointDecision>                     pending_;
   std::vector<CheckpointDecision>                     conflicts_;
   BlockIndex                                          cp_ {0};
   bool                                                has_cp_ {false};
   BlockIndex                                          tip_ {0};
};

} // namespace accgadget
