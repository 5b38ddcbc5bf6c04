#include <accgadget/chain.hpp>
#include <accgadget/kernels.hpp>

#include <algorithm>
#include <unordered_set>

namespace accgadget {

BlockId compute_block_id(const std::optional<BlockId>& parent, NodeId producer, Slot slot,
                         std::span<const TxId> payload)
{
   std::uint64_t h = parent ? hash_combine(0x5b10c0ULL, parent->value) : 0x9e4e515ULL;
   h = hash_combine(h, producer);
   h = hash_combine(h, static_cast<std::uint64_t>(slot));
   h = hash_combine(h, payload.size());
   for (TxId tx : payload)
      h = hash_combine(h, tx);
   return BlockId {h};
}

Block make_genesis()
{
   Block g;
   g.id = compute_block_id(std::nullopt, 0, 0, {});
   return g;
}

void ChainParams::validate() const
{
   if (n == 0)
      throw config_invalid("n >= 1");
   if (!(p > 0.0 && p < 1.0))
      throw config_invalid("0 < p < 1");
   if (k < 1)
      throw config_invalid("k >= 1");
   if (k_cp < 1)
      throw config_invalid("k_cp >= 1");
   if (f > (n + 1) / 2)
      throw config_invalid("f <= ceil(n/2)");
   if (delta < 0)
      throw config_invalid("delta >= 0");
}

// ---------------------------------------------------------------------------
// BlockStore

BlockStore::BlockStore()
{
   Block g = make_genesis();
   by_id_.emplace(g.id, 0);
   blocks_.push_back(std::move(g));
   parent_.push_back(0);
   height_.push_back(0);
   jump_.push_back({});
   jump_.back().fill(0);
   ledger_len_.push_back(0);
   digest_.push_back(0);
   fresh_.emplace_back();
}

std::optional<BlockIndex> BlockStore::find(BlockId id) const
{
   auto it = by_id_.find(id);
   if (it == by_id_.end())
      return std::nullopt;
   return it->second;
}

BlockIndex BlockStore::index_of(BlockId id) const
{
   auto it = by_id_.find(id);
   if (it == by_id_.end())
      throw std::out_of_range("unknown block " + to_hex(id.value));
   return it->second;
}

BlockIndex BlockStore::add(Block block)
{
   if (auto existing = find(block.id))
      return *existing;
   if (!block.parent)
      throw std::invalid_argument("second genesis block");
   const BlockIndex p = index_of(*block.parent);
   if (block.slot <= blocks_[p].slot)
      throw std::invalid_argument("block slot must exceed parent slot");

   const auto idx = static_cast<BlockIndex>(blocks_.size());
   std::array<BlockIndex, levels> jumps;
   jumps[0] = p;
   for (int j = 1; j < levels; ++j)
      jumps[j] = jump_[jumps[j - 1]][j - 1];

   std::vector<TxId> fresh;
   std::uint64_t digest = digest_[p];
   for (TxId tx : block.payload) {
      if (std::find(fresh.begin(), fresh.end(), tx) != fresh.end() || ledger_contains(p, tx))
         continue;
      fresh.push_back(tx);
      digest = fold_digest(digest, tx);
   }

   for (TxId tx : fresh)
      tx_blocks_[tx].push_back(idx);
   by_id_.emplace(block.id, idx);
   ledger_len_.push_back(ledger_len_[p] + fresh.size());
   digest_.push_back(digest);
   fresh_.push_back(std::move(fresh));
   parent_.push_back(p);
   height_.push_back(height_[p] + 1);
   jump_.push_back(jumps);
   blocks_.push_back(std::move(block));
   return idx;
}

BlockIndex BlockStore::ancestor_at(BlockIndex b, std::int64_t h) const
{
   if (h < 0 || h > height_[b])
      throw std::out_of_range("ancestor height out of range");
   std::int64_t up = height_[b] - h;
   for (int j = 0; up != 0; ++j, up >>= 1)
      if (up & 1)
         b = jump_[b][j];
   return b;
}

bool BlockStore::is_ancestor(BlockIndex a, BlockIndex b) const
{
   if (height_[a] > height_[b])
      return false;
   return ancestor_at(b, height_[a]) == a;
}

std::vector<TxId> BlockStore::ledger(BlockIndex b) const
{
   std::vector<BlockIndex> path;
   for (BlockIndex x = b; x != 0; x = parent_[x])
      path.push_back(x);
   std::vector<TxId> out;
   out.reserve(ledger_len_[b]);
   for (auto it = path.rbegin(); it != path.rend(); ++it)
      out.insert(out.end(), fresh_[*it].begin(), fresh_[*it].end());
   return out;
}

bool BlockStore::ledger_contains(BlockIndex b, TxId tx) const
{
   auto it = tx_blocks_.find(tx);
   if (it == tx_blocks_.end())
      return false;
   for (BlockIndex x : it->second)
      if (is_ancestor(x, b))
         return true;
   return false;
}

std::uint64_t BlockStore::prefix_digest(BlockIndex b, std::uint64_t len) const
{
   if (len >= ledger_len_[b])
      return digest_[b];
   // Deepest ancestor whose ledger is no longer than len.
   BlockIndex a = b;
   for (int j = levels - 1; j >= 0; --j) {
      const BlockIndex up = jump_[a][j];
      if (ledger_len_[up] > len)
         a = up;
   }
   // a is the shallowest block with ledger_len > len; its parent has <= len.
   const BlockIndex base = parent_[a];
   std::uint64_t d = digest_[base];
   const auto need = len - ledger_len_[base];
   for (std::uint64_t i = 0; i < need; ++i)
      d = fold_digest(d, fresh_[a][i]);
   return d;
}

bool BlockStore::ledger_is_prefix(BlockIndex a, BlockIndex b) const
{
   if (ledger_len_[a] > ledger_len_[b])
      return false;
   return prefix_digest(b, ledger_len_[a]) == digest_[a];
}

// ---------------------------------------------------------------------------
// BlockTree

BlockTree::BlockTree() : BlockTree(std::make_shared<BlockStore>()) {}

BlockTree::BlockTree(std::shared_ptr<BlockStore> store) : store_(std::move(store))
{
   learn(0);
}

bool BlockTree::learn(BlockIndex i)
{
   if (knows(i))
      return true;
   if (i != 0 && !knows(store_->parent(i)))
      return false;
   if (known_.size() <= i)
      known_.resize(std::max<std::size_t>(store_->size(), i + 1), 0);
   known_[i] = 1;
   known_list_.push_back(i);
   return true;
}

BlockIndex BlockTree::insert(const Block& block)
{
   const BlockIndex i = store_->add(block);
   if (!learn(i))
      throw std::invalid_argument("parent of inserted block is not known");
   return i;
}

bool BlockTree::knows(BlockId id) const
{
   auto i = store_->find(id);
   return i && knows(*i);
}

// ---------------------------------------------------------------------------
// Operations

bool leader_lottery(NodeId node, Slot slot, const ChainParams& params, std::uint64_t seed)
{
   const auto t = kernels::make_threshold(params.p);
   const auto key = derive_seed(seed, stream::lottery);
   return kernels::lottery_wins(t, kernels::lottery_hash(key, node, static_cast<std::uint32_t>(slot)));
}

BlockIndex latest_checkpoint(const BlockTree& tree, std::span<const CheckpointDecision> checkpoints)
{
   const BlockStore& s = tree.store();
   BlockIndex deepest = 0;
   for (const auto& d : checkpoints) {
      if (!d.block)
         continue;
      const BlockIndex c = s.index_of(*d.block);
      if (!tree.knows(c))
         throw std::out_of_range("checkpointed block not in tree");
      if (s.is_ancestor(deepest, c))
         deepest = c;
      else if (!s.is_ancestor(c, deepest))
         throw conflicting_checkpoints("checkpoints " + to_hex(s.block(deepest).id.value) + " and " +
                                       to_hex(d.block->value) + " conflict");
   }
   return deepest;
}

namespace {

bool better_tip(const BlockStore& s, BlockIndex cand, BlockIndex cur)
{
   if (s.height(cand) != s.height(cur))
      return s.height(cand) > s.height(cur);
   return s.block(cand).id < s.block(cur).id;
}

} // namespace

Chain chain_to(const BlockStore& store, BlockIndex tip)
{
   Chain c(static_cast<std::size_t>(store.height(tip)) + 1);
   for (BlockIndex x = tip;; x = store.parent(x)) {
      c[static_cast<std::size_t>(store.height(x))] = x;
      if (x == 0)
         break;
   }
   return c;
}

Chain fork_choice(const BlockTree& tree, std::span<const CheckpointDecision> checkpoints)
{
   const BlockStore& s = tree.store();
   const BlockIndex cp = latest_checkpoint(tree, checkpoints);
   BlockIndex tip = cp;
   for (BlockIndex b : tree.known_blocks())
      if (s.is_ancestor(cp, b) && better_tip(s, b, tip))
         tip = b;
   return chain_to(s, tip);
}

BlockIndex confirm_da_block(const BlockStore& store, const Chain& chain, std::optional<BlockIndex> latest_cp,
                            std::int64_t k)
{
   const auto tip_h = static_cast<std::int64_t>(chain.size()) - 1;
   std::int64_t h = std::max<std::int64_t>(tip_h - k, 0);
   if (latest_cp) {
      const std::int64_t cp_h = store.height(*latest_cp);
      if (cp_h > tip_h || chain[static_cast<std::size_t>(cp_h)] != *latest_cp)
         throw std::invalid_argument("checkpoint is not on the chain");
      h = std::max(h, cp_h);
   }
   return chain[static_cast<std::size_t>(h)];
}

std::vector<TxId> confirm_da(const BlockStore& store, const Chain& chain, std::optional<BlockIndex> latest_cp,
                             std::int64_t k)
{
   return store.ledger(confirm_da_block(store, chain, latest_cp, k));
}

Block produce_block(NodeId node, Slot slot, const BlockTree& tree, std::span<const CheckpointDecision> checkpoints,
                    std::span<const TxId> mempool)
{
   const Chain chain = fork_choice(tree, checkpoints);
   const BlockStore& s = tree.store();
   const BlockIndex tip = chain.back();
   Block b;
   b.parent = s.block(tip).id;
   b.producer = node;
   b.slot = slot;
   std::unordered_set<TxId> seen;
   for (TxId tx : mempool)
      if (seen.insert(tx).second && !s.ledger_contains(tip, tx))
         b.payload.push_back(tx);
   b.id = compute_block_id(b.parent, b.producer, b.slot, b.payload);
   return b;
}

bool validate_block(const Block& block, const BlockTree& tree, const ChainParams& params, std::uint64_t seed)
{
   if (!block.parent)
      return block.slot == 0 && block.id == make_genesis().id;
   if (block.id != compute_block_id(block.parent, block.producer, block.slot, block.payload))
      return false;
   auto p = tree.store().find(*block.parent);
   if (!p || !tree.knows(*p))
      return false;
   if (block.slot <= tree.store().block(*p).slot)
      return false;
   if (block.producer >= params.n)
      return false;
   return leader_lottery(block.producer, block.slot, params, seed);
}

// ---------------------------------------------------------------------------
// ChainView

ChainView::ChainView(std::shared_ptr<BlockStore> store) : tree_(std::move(store)) {}

void ChainView::receive(BlockIndex i)
{
   if (tree_.knows(i))
      return;
   const BlockIndex p = store().parent(i);
   if (!tree_.knows(p)) {
      auto& waiting = orphans_[p];
      if (std::find(waiting.begin(), waiting.end(), i) == waiting.end())
         waiting.push_back(i);
      return;
   }
   learn_recursive(i);
   try_apply_pending();
}

void ChainView::learn_recursive(BlockIndex i)
{
   std::vector<BlockIndex> todo {i};
   while (!todo.empty()) {
      const BlockIndex b = todo.back();
      todo.pop_back();
      if (!tree_.learn(b))
         continue;
      consider(b);
      auto it = orphans_.find(b);
      if (it != orphans_.end()) {
         todo.insert(todo.end(), it->second.begin(), it->second.end());
         orphans_.erase(it);
      }
   }
}

void ChainView::consider(BlockIndex b)
{
   const BlockStore& s = store();
   if (s.is_ancestor(cp_, b) && better_tip(s, b, tip_))
      tip_ = b;
}

void ChainView::recompute_tip()
{
   const BlockStore& s = store();
   tip_ = cp_;
   for (BlockIndex b : tree_.known_blocks())
      if (s.is_ancestor(cp_, b) && better_tip(s, b, tip_))
         tip_ = b;
}

void ChainView::apply_checkpoint(const CheckpointDecision& d)
{
   pending_.push_back(d);
   try_apply_pending();
}

void ChainView::try_apply_pending()
{
   const BlockStore& s = store();
   std::size_t done = 0;
   for (; done < pending_.size(); ++done) {
      const CheckpointDecision& d = pending_[done];
      if (!d.block) {
         decisions_.push_back(d);
         continue;
      }
      auto i = s.find(*d.block);
      if (!i || !tree_.knows(*i))
         break;
      if (s.is_ancestor(cp_, *i)) {
         cp_ = *i;
         has_cp_ = true;
         decisions_.push_back(d);
         recompute_tip();
      } else if (s.is_ancestor(*i, cp_)) {
         decisions_.push_back(d);
      } else {
         conflicts_.push_back(d);
      }
   }
   pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(done));
}

BlockIndex ChainView::deep_block(std::int64_t depth) const
{
   const std::int64_t h = std::max<std::int64_t>(store().height(tip_) - depth, 0);
   return store().ancestor_at(tip_, h);
}

BlockIndex ChainView::da_block(std::int64_t k) const
{
   const std::int64_t h = std::max<std::int64_t>(store().height(tip_) - k, store().height(cp_));
   return store().ancestor_at(tip_, h);
}

} // namespace accgadget
