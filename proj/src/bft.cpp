#include <accgadget/bft.hpp>

#include <algorithm>
#include <set>

namespace accgadget {

std::uint64_t compute_bft_digest(std::uint64_t parent, std::int64_t epoch, std::int64_t height, NodeId proposer,
                                 std::span<const CheckpointVote> payloads)
{
   std::uint64_t h = hash_combine(parent, static_cast<std::uint64_t>(epoch));
   h = hash_combine(h, static_cast<std::uint64_t>(height));
   h = hash_combine(h, proposer);
   for (const auto& p : payloads)
      h = hash_combine(h, p.payload_id());
   return hash_combine(h, payloads.size());
}

std::uint64_t bft_vote_digest(std::int64_t epoch, std::uint64_t digest, std::int64_t height)
{
   return hash_combine(hash_combine(hash_combine(0x766f7465ULL, static_cast<std::uint64_t>(epoch)), digest),
                       static_cast<std::uint64_t>(height));
}

bool QuorumCert::well_formed(std::uint32_t n) const
{
   if (signers.size() < threshold || signers.size() != signatures.size())
      return false;
   for (std::size_t i = 0; i < signers.size(); ++i) {
      if (signers[i] >= n)
         return false;
      if (i > 0 && signers[i] <= signers[i - 1])
         return false;
   }
   return true;
}

std::vector<CheckpointVote> BftEvidence::log_payloads() const
{
   std::vector<CheckpointVote> out;
   std::unordered_set<std::uint64_t> seen;
   for (std::size_t i = 0; i <= finalized && i < chain.size(); ++i)
      for (const auto& p : chain[i].payloads)
         if (seen.insert(p.payload_id()).second)
            out.push_back(p);
   return out;
}

BftConfig BftConfig::defaults(std::uint32_t n, std::uint32_t f, Slot delta, std::uint64_t seed)
{
   BftConfig c;
   c.n = n;
   c.q_bft = n - f;
   c.delta = delta;
   c.epoch_len = std::max<Slot>(1, 3 * delta);
   c.seed = seed;
   return c;
}

void BftConfig::validate() const
{
   if (n == 0)
      throw config_invalid("bft: n >= 1");
   if (q_bft == 0 || q_bft > n || 2 * static_cast<std::uint64_t>(q_bft) <= n)
      throw config_invalid("bft: n/2 < q_bft <= n");
   if (delta < 0 || epoch_len < 1 || epoch_len <= delta)
      throw config_invalid("bft: epoch_len > delta >= 0");
}

NodeId bft_leader(std::int64_t epoch, std::uint32_t n, std::uint64_t seed)
{
   if (n <= 1)
      return 0;
   const std::uint64_t h = hash_combine(derive_seed(seed, stream::bft_leader), static_cast<std::uint64_t>(epoch));
   return static_cast<NodeId>(h % n);
}

void BftOutput::append(BftOutput&& other)
{
   for (auto& m : other.outbound)
      outbound.push_back(std::move(m));
   for (auto& e : other.finalized)
      finalized.push_back(std::move(e));
}

// ---------------------------------------------------------------------------
// BftReplica

BftReplica::BftReplica(BftConfig cfg, NodeId self, Signer signer, bool silent_leader)
   : cfg_(cfg), self_(self), signer_(signer), silent_leader_(silent_leader)
{
   auto g = std::make_shared<BftBlock>();
   g->digest = bft_genesis_digest;
   block_info info;
   info.block = std::move(g);
   info.notarized = true;
   info.chain_notarized = true;
   blocks_.emplace(bft_genesis_digest, std::move(info));
   log_digests_.push_back(0);
}

void BftReplica::submit(const CheckpointVote& payload)
{
   const std::uint64_t id = payload.payload_id();
   if (logged_ids_.count(id) || !pending_ids_.insert(id).second)
      return;
   pending_.push_back(payload);
}

Slot BftReplica::local_time(Slot now) const
{
   Slot t = now - paused_total_;
   if (paused_)
      t -= now - pause_started_;
   return t;
}

std::int64_t BftReplica::epoch_at(Slot now) const { return local_time(now) / cfg_.epoch_len + 1; }

std::int64_t BftReplica::finalized_height() const { return blocks_.at(final_digest_).block->height; }

BftOutput BftReplica::tick(Slot now)
{
   BftOutput out;
   if (paused_)
      return out;
   const std::int64_t e = epoch_at(now);
   while (!future_props_.empty() && future_props_.begin()->first <= e) {
      auto it = future_props_.begin();
      if (it->first == e && first_prop_epoch_ < e) {
         first_prop_ = it->second;
         first_prop_epoch_ = e;
      }
      future_props_.erase(it);
   }
   try_propose(now, out);
   try_vote(now, out);
   return out;
}

BftOutput BftReplica::receive(const BftMessage& msg, Slot now)
{
   BftOutput out;
   if (paused_) {
      queued_.push_back(msg);
      return out;
   }
   handle(msg, now, out);
   return out;
}

BftOutput BftReplica::pause(bool paused, Slot now)
{
   BftOutput out;
   if (paused && !paused_) {
      paused_ = true;
      pause_started_ = now;
   } else if (!paused && paused_) {
      paused_total_ += now - pause_started_;
      paused_ = false;
      auto queued = std::move(queued_);
      queued_.clear();
      for (const auto& m : queued)
         handle(m, now, out);
   }
   return out;
}

void BftReplica::handle(const BftMessage& msg, Slot now, BftOutput& out)
{
   if (msg.what == BftMessage::type::proposal) {
      if (msg.block)
         on_proposal(msg.block, now, out);
   } else {
      on_vote(msg.vote, now, out);
   }
}

void BftReplica::on_proposal(const std::shared_ptr<const BftBlock>& b, Slot now, BftOutput& out)
{
   if (b->epoch < 1 || b->proposer >= cfg_.n || b->proposer != bft_leader(b->epoch, cfg_.n, cfg_.seed))
      return;
   if (b->digest != compute_bft_digest(b->parent, b->epoch, b->height, b->proposer, b->payloads))
      return;
   if (b->signature != signer_.sign_digest(b->digest, b->proposer))
      return;
   insert_block(b, out);
   const std::int64_t e = epoch_at(now);
   if (b->epoch == e && first_prop_epoch_ < e) {
      first_prop_ = b;
      first_prop_epoch_ = e;
   } else if (b->epoch > e) {
      future_props_.try_emplace(b->epoch, b);
   }
   try_vote(now, out);
}

void BftReplica::on_vote(const BftVote& v, Slot now, BftOutput& out)
{
   if (v.voter >= cfg_.n || v.signature != signer_.sign_digest(bft_vote_digest(v.epoch, v.digest, v.height), v.voter))
      return;
   if (!tallies_[v.digest].try_emplace(v.voter, v).second)
      return;
   check_notarized(v.digest, out);
   try_vote(now, out);
}

void BftReplica::insert_block(const std::shared_ptr<const BftBlock>& root, BftOutput& out)
{
   std::vector<std::shared_ptr<const BftBlock>> work {root};
   while (!work.empty()) {
      auto b = std::move(work.back());
      work.pop_back();
      if (blocks_.count(b->digest))
         continue;
      auto parent = blocks_.find(b->parent);
      if (parent == blocks_.end()) {
         orphans_[b->parent].push_back(b);
         continue;
      }
      const BftBlock& pb = *parent->second.block;
      if (b->height != pb.height + 1 || b->epoch <= pb.epoch)
         continue;
      parent->second.children.push_back(b->digest);
      block_info info;
      info.block = b;
      blocks_.emplace(b->digest, std::move(info));
      check_notarized(b->digest, out);
      if (auto o = orphans_.find(b->digest); o != orphans_.end()) {
         for (auto& child : o->second)
            work.push_back(std::move(child));
         orphans_.erase(o);
      }
   }
}

void BftReplica::check_notarized(std::uint64_t digest, BftOutput& out)
{
   auto it = blocks_.find(digest);
   if (it == blocks_.end() || it->second.notarized)
      return;
   auto t = tallies_.find(digest);
   if (t == tallies_.end())
      return;
   const BftBlock& b = *it->second.block;
   QuorumCert qc;
   qc.view = b.epoch;
   qc.block_digest = digest;
   qc.height = b.height;
   qc.threshold = cfg_.q_bft;
   for (const auto& [voter, v] : t->second) {
      if (v.epoch != b.epoch || v.height != b.height)
         continue;
      qc.signers.push_back(voter);
      qc.signatures.push_back(v.signature);
   }
   if (qc.signers.size() < cfg_.q_bft)
      return;
   it->second.notarized = true;
   it->second.qc = std::move(qc);
   if (blocks_.at(b.parent).chain_notarized)
      propagate_chain_notarized(digest, out);
}

void BftReplica::propagate_chain_notarized(std::uint64_t digest, BftOutput& out)
{
   std::vector<std::uint64_t> work {digest};
   while (!work.empty()) {
      const std::uint64_t d = work.back();
      work.pop_back();
      block_info& info = blocks_.at(d);
      info.chain_notarized = true;
      const BftBlock& b = *info.block;
      if (b.height > best_height_ || (b.height == best_height_ && d < best_digest_)) {
         best_height_ = b.height;
         best_digest_ = d;
      }
      const BftBlock& p = *blocks_.at(b.parent).block;
      if (p.height >= 1) {
         const BftBlock& g = *blocks_.at(p.parent).block;
         if (b.epoch == p.epoch + 1 && p.epoch == g.epoch + 1)
            finalize(p.digest, d, out);
      }
      for (std::uint64_t c : info.children) {
         const block_info& ci = blocks_.at(c);
         if (ci.notarized && !ci.chain_notarized)
            work.push_back(c);
      }
   }
}

bool BftReplica::descends(std::uint64_t digest, std::uint64_t ancestor) const
{
   const std::int64_t h = blocks_.at(ancestor).block->height;
   const BftBlock* b = blocks_.at(digest).block.get();
   while (b->height > h)
      b = blocks_.at(b->parent).block.get();
   return b->digest == ancestor;
}

void BftReplica::finalize(std::uint64_t digest, std::uint64_t finalizer, BftOutput& out)
{
   const BftBlock& target = *blocks_.at(digest).block;
   if (target.height <= finalized_height() || !descends(digest, final_digest_))
      return;
   std::vector<std::uint64_t> path;
   for (std::uint64_t d = digest; d != final_digest_; d = blocks_.at(d).block->parent)
      path.push_back(d);
   bool pending_changed = false;
   for (auto it = path.rbegin(); it != path.rend(); ++it) {
      const block_info& info = blocks_.at(*it);
      for (const auto& p : info.block->payloads) {
         const std::uint64_t id = p.payload_id();
         if (!logged_ids_.insert(id).second)
            continue;
         BftLogEntry e {p, log_.size(), info.qc};
         log_digests_.push_back(hash_combine(log_digests_.back(), id));
         out.finalized.push_back(e);
         log_.push_back(std::move(e));
         pending_changed |= pending_ids_.erase(id) > 0;
      }
   }
   if (pending_changed)
      std::erase_if(pending_, [&](const CheckpointVote& v) { return !pending_ids_.count(v.payload_id()); });
   final_digest_ = digest;
   finalizer_digest_ = finalizer;
}

void BftReplica::try_vote(Slot now, BftOutput& out)
{
   if (paused_)
      return;
   const std::int64_t e = epoch_at(now);
   if (voted_epoch_ >= e || first_prop_epoch_ != e || !first_prop_)
      return;
   const BftBlock& b = *first_prop_;
   if (!blocks_.count(b.digest))
      return;
   const block_info& parent = blocks_.at(b.parent);
   if (!parent.chain_notarized || parent.block->height != best_height_)
      return;
   voted_epoch_ = e;
   BftVote v {self_, b.epoch, b.digest, b.height, 0};
   v.signature = signer_.sign_digest(bft_vote_digest(v.epoch, v.digest, v.height), self_);
   out.outbound.push_back({BftMessage::type::vote, nullptr, v});
   on_vote(v, now, out);
}

std::vector<CheckpointVote> BftReplica::unordered_payloads(std::uint64_t parent) const
{
   std::unordered_set<std::uint64_t> in_chain;
   const std::int64_t fh = finalized_height();
   for (const BftBlock* b = blocks_.at(parent).block.get(); b->height > fh; b = blocks_.at(b->parent).block.get())
      for (const auto& p : b->payloads)
         in_chain.insert(p.payload_id());
   std::vector<CheckpointVote> out;
   for (const auto& p : pending_)
      if (!in_chain.count(p.payload_id()))
         out.push_back(p);
   return out;
}

bool BftReplica::unfinalized_payloads_on(std::uint64_t tip) const
{
   const std::int64_t fh = finalized_height();
   for (const BftBlock* b = blocks_.at(tip).block.get(); b->height > fh; b = blocks_.at(b->parent).block.get())
      if (!b->payloads.empty())
         return true;
   return false;
}

void BftReplica::try_propose(Slot now, BftOutput& out)
{
   if (silent_leader_ || paused_)
      return;
   const std::int64_t e = epoch_at(now);
   if (proposed_epoch_ >= e || bft_leader(e, cfg_.n, cfg_.seed) != self_)
      return;
   if (local_time(now) % cfg_.epoch_len < cfg_.delta)
      return;
   auto payloads = unordered_payloads(best_digest_);
   if (payloads.empty() && !unfinalized_payloads_on(best_digest_))
      return;
   proposed_epoch_ = e;
   auto b = std::make_shared<BftBlock>();
   b->parent = best_digest_;
   b->epoch = e;
   b->height = best_height_ + 1;
   b->proposer = self_;
   b->payloads = std::move(payloads);
   b->digest = compute_bft_digest(b->parent, b->epoch, b->height, b->proposer, b->payloads);
   b->signature = signer_.sign_digest(b->digest, self_);
   std::shared_ptr<const BftBlock> cb = std::move(b);
   out.outbound.push_back({BftMessage::type::proposal, cb, {}});
   on_proposal(cb, now, out);
}

BftEvidence BftReplica::evidence() const
{
   std::vector<std::uint64_t> path;
   for (std::uint64_t d = finalizer_digest_;; d = blocks_.at(d).block->parent) {
      path.push_back(d);
      if (d == bft_genesis_digest)
         break;
   }
   BftEvidence e;
   for (auto it = path.rbegin(); it != path.rend(); ++it) {
      const block_info& info = blocks_.at(*it);
      const BftBlock& b = *info.block;
      e.chain.push_back({b.epoch, b.digest, b.parent, b.height, b.proposer, b.payloads, info.qc});
   }
   e.finalized = static_cast<std::size_t>(finalized_height());
   return e;
}

// ---------------------------------------------------------------------------
// Forensics

bool payload_logs_conflict(std::span<const CheckpointVote> a, std::span<const CheckpointVote> b)
{
   const std::size_t m = std::min(a.size(), b.size());
   for (std::size_t i = 0; i < m; ++i)
      if (a[i].payload_id() != b[i].payload_id())
         return true;
   return false;
}

namespace {

void collect_votes(const BftEvidence& e, std::uint32_t q_bft, std::set<SignedBftVote>& out)
{
   for (const auto& link : e.chain) {
      if (link.height == 0)
         continue;
      if (link.qc.signers.size() < q_bft || link.qc.signers.size() != link.qc.signatures.size())
         throw evidence_invalid("quorum certificate below threshold");
      for (std::size_t i = 0; i < link.qc.signers.size(); ++i)
         out.insert({link.qc.signers[i], link.qc.view, link.qc.block_digest, link.qc.height, link.qc.signatures[i]});
   }
}

} // namespace

std::vector<BftViolation> bft_violations(const BftEvidence& e1, const BftEvidence& e2, std::uint32_t q_bft)
{
   if (!payload_logs_conflict(e1.log_payloads(), e2.log_payloads()))
      throw not_conflicting("finalized BFT logs are prefix-related");
   std::set<SignedBftVote> votes;
   collect_votes(e1, q_bft, votes);
   collect_votes(e2, q_bft, votes);

   std::vector<BftViolation> out;
   std::vector<SignedBftVote> mine;
   auto flush = [&] {
      bool found = false;
      for (std::size_t i = 0; i < mine.size() && !found; ++i)
         for (std::size_t j = i + 1; j < mine.size() && !found; ++j) {
            const auto& a = mine[i];
            const auto& b = mine[j];
            const bool double_vote = a.epoch == b.epoch && a.digest != b.digest;
            const bool lock_broken = a.epoch < b.epoch && b.height < a.height;
            if (double_vote || lock_broken) {
               out.push_back({a.signer, a, b});
               found = true;
            }
         }
      mine.clear();
   };
   for (const auto& v : votes) {
      if (!mine.empty() && mine.front().signer != v.signer)
         flush();
      mine.push_back(v);
   }
   flush();
   return out;
}

std::vector<NodeId> bft_forensics(const BftEvidence& e1, const BftEvidence& e2, std::uint32_t q_bft)
{
   std::vector<NodeId> ids;
   for (const auto& v : bft_violations(e1, e2, q_bft))
      ids.push_back(v.node);
   return ids;
}

void verify_bft_evidence(const BftEvidence& e, std::uint32_t n, std::uint32_t q_bft, const Signer& signer)
{
   if (e.chain.empty() || e.chain.front().digest != bft_genesis_digest || e.finalized >= e.chain.size())
      throw evidence_invalid("BFT evidence must start at genesis and mark a finalized link");
   for (std::size_t i = 1; i < e.chain.size(); ++i) {
      const auto& l = e.chain[i];
      const auto& p = e.chain[i - 1];
      if (l.parent != p.digest || l.height != static_cast<std::int64_t>(i) || l.epoch <= p.epoch)
         throw evidence_invalid("BFT evidence chain is not linked");
      if (l.digest != compute_bft_digest(l.parent, l.epoch, l.height, l.proposer, l.payloads))
         throw evidence_invalid("BFT evidence block digest mismatch");
      if (l.qc.view != l.epoch || l.qc.block_digest != l.digest || l.qc.height != l.height ||
          l.qc.threshold < q_bft || !l.qc.well_formed(n))
         throw evidence_invalid("BFT evidence quorum certificate malformed");
      for (std::size_t s = 0; s < l.qc.signers.size(); ++s)
         if (l.qc.signatures[s] != signer.sign_digest(bft_vote_digest(l.epoch, l.digest, l.height), l.qc.signers[s]))
            throw evidence_invalid("BFT evidence signature invalid");
   }
}

} // namespace accgadget
