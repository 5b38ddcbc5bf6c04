#include <accgadget/adjudication.hpp>

#include <algorithm>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace accgadget {

std::string to_string(proof_kind k)
{
   switch (k) {
   case proof_kind::bft_equivocation: return "bft_equivocation";
   case proof_kind::checkpoint_double_vote: return "checkpoint_double_vote";
   case proof_kind::cross_iteration_inconsistency: return "cross_iteration_inconsistency";
   }
   return "?";
}

std::string to_string(verdict_outcome o)
{
   return o == verdict_outcome::violators_found ? "violators_found" : "unattributable_conflict";
}

bool conflicting(std::span<const TxId> l1, std::span<const TxId> l2)
{
   const std::size_t m = std::min(l1.size(), l2.size());
   return !std::equal(l1.begin(), l1.begin() + static_cast<std::ptrdiff_t>(m), l2.begin());
}

namespace {

std::vector<TxId> chain_ledger(const std::vector<Block>& chain, std::size_t end)
{
   std::vector<TxId> out;
   std::unordered_set<TxId> seen;
   for (std::size_t i = 0; i <= end && i < chain.size(); ++i)
      for (TxId tx : chain[i].payload)
         if (seen.insert(tx).second)
            out.push_back(tx);
   return out;
}

/// Parent links of every block either evidence mentions.
class ancestry
{
public:
   void add(const std::vector<Block>& chain)
   {
      for (const auto& b : chain)
         parent_.try_emplace(b.id, b.parent);
   }

   bool known(BlockId b) const { return parent_.count(b) != 0; }

   bool is_ancestor(BlockId a, BlockId b) const
   {
      std::optional<BlockId> cur = b;
      while (cur) {
         if (*cur == a)
            return true;
         auto it = parent_.find(*cur);
         if (it == parent_.end())
            return false;
         cur = it->second;
      }
      return false;
   }

   /// Both ancestries fully known and neither block extends the other.
   bool provably_conflict(BlockId a, BlockId b) const
   {
      return known(a) && known(b) && !is_ancestor(a, b) && !is_ancestor(b, a);
   }

private:
   std::unordered_map<BlockId, std::optional<BlockId>> parent_;
};

void add_violator(Verdict& v, Supporting s)
{
   auto it = std::lower_bound(v.violators.begin(), v.violators.end(), s.node);
   if (it != v.violators.end() && *it == s.node)
      return;
   const auto pos = it - v.violators.begin();
   v.violators.insert(it, s.node);
   v.supporting.insert(v.supporting.begin() + pos, std::move(s));
}

void double_accepts(const Evidence& w1, const Evidence& w2, Verdict& v)
{
   std::map<std::pair<NodeId, Iteration>, CheckpointVote> first;
   for (const auto* w : {&w1, &w2})
      for (const auto& vote : w->vote_transcript) {
         if (vote.kind != vote_kind::accept || !vote.block)
            continue;
         auto [it, fresh] = first.try_emplace({vote.author, vote.iteration}, vote);
         if (!fresh && it->second.block != vote.block)
            add_violator(v, {vote.author, std::nullopt, std::make_pair(it->second, vote)});
      }
}

void cross_iteration(const Evidence& w, const GadgetParams& params, const ancestry& anc, Verdict& v)
{
   const auto decisions = replay_votes(w.vote_transcript, params);
   // Effective checkpoint in force when each iteration starts; a later
   // checkpoint that conflicts with the current one is ignored.
   std::map<Iteration, BlockId> in_force;
   std::optional<BlockId> cur;
   for (const auto& d : decisions) {
      if (d.block && (!cur || anc.is_ancestor(*cur, *d.block)))
         cur = d.block;
      if (cur)
         in_force[d.iteration + 1] = *cur;
   }
   // First accept for each checkpointed block, kept as the counterpart.
   std::map<BlockId, CheckpointVote> accept_for;
   for (const auto& vote : w.vote_transcript)
      if (vote.kind == vote_kind::accept && vote.block)
         accept_for.try_emplace(*vote.block, vote);

   for (const auto& vote : w.vote_transcript) {
      if (vote.kind != vote_kind::accept || !vote.block)
         continue;
      auto it = in_force.find(vote.iteration);
      if (it == in_force.end())
         continue;
      if (!anc.provably_conflict(it->second, *vote.block))
         continue;
      auto cp_vote = accept_for.find(it->second);
      CheckpointVote counterpart = cp_vote != accept_for.end() ? cp_vote->second : vote;
      add_violator(v, {vote.author, std::nullopt, std::make_pair(counterpart, vote)});
   }
}

bool gadget_active(const Evidence& w) { return !w.vote_transcript.empty() || w.bft_evidence.chain.size() > 1; }

} // namespace

std::vector<TxId> evidence_ledger(const Evidence& w, const GadgetParams& params)
{
   if (w.chain.empty())
      return {};
   if (!gadget_active(w)) {
      const auto tip_h = static_cast<std::int64_t>(w.chain.size()) - 1;
      return chain_ledger(w.chain, static_cast<std::size_t>(std::max<std::int64_t>(tip_h - w.k, 0)));
   }
   std::unordered_map<BlockId, std::size_t> pos;
   for (std::size_t i = 0; i < w.chain.size(); ++i)
      pos.emplace(w.chain[i].id, i);
   std::size_t cp = 0;
   for (const auto& d : replay_votes(w.vote_transcript, params)) {
      if (!d.block)
         continue;
      auto it = pos.find(*d.block);
      if (it != pos.end() && it->second > cp)
         cp = it->second;
   }
   return chain_ledger(w.chain, cp);
}

Verdict adjudicate(const Evidence& w1, const Evidence& w2, const GadgetParams& params, std::uint32_t q_bft)
{
   if (!conflicting(evidence_ledger(w1, params), evidence_ledger(w2, params)))
      throw not_conflicting("ledgers are prefix-related");

   Verdict v;
   if (payload_logs_conflict(w1.bft_evidence.log_payloads(), w2.bft_evidence.log_payloads())) {
      for (const auto& viol : bft_violations(w1.bft_evidence, w2.bft_evidence, q_bft))
         add_violator(v, {viol.node, std::make_pair(viol.first, viol.second), std::nullopt});
      if (!v.violators.empty()) {
         v.outcome = verdict_outcome::violators_found;
         v.kind = proof_kind::bft_equivocation;
         return v;
      }
   }

   double_accepts(w1, w2, v);
   if (!v.violators.empty()) {
      v.outcome = verdict_outcome::violators_found;
      v.kind = proof_kind::checkpoint_double_vote;
      return v;
   }

   ancestry anc;
   anc.add(w1.chain);
   anc.add(w2.chain);
   cross_iteration(w1, params, anc, v);
   cross_iteration(w2, params, anc, v);
   if (!v.violators.empty()) {
      v.outcome = verdict_outcome::violators_found;
      v.kind = proof_kind::cross_iteration_inconsistency;
      return v;
   }
   v.outcome = verdict_outcome::unattributable_conflict;
   return v;
}

void verify_evidence(const Evidence& w, std::uint32_t n, std::uint32_t q_bft, const Signer& signer)
{
   for (std::size_t i = 0; i < w.chain.size(); ++i) {
      const Block& b = w.chain[i];
      if (b.id != compute_block_id(b.parent, b.producer, b.slot, b.payload))
         throw evidence_invalid("block id mismatch at height " + std::to_string(i));
      if (i == 0 ? b.parent.has_value() || b.id != make_genesis().id : b.parent != w.chain[i - 1].id)
         throw evidence_invalid("chain is not linked at height " + std::to_string(i));
   }
   for (const auto& vote : w.vote_transcript)
      if (vote.author >= n || !signer.verify(vote))
         throw evidence_invalid("transcript vote with invalid signature");
   if (!w.bft_evidence.chain.empty())
      verify_bft_evidence(w.bft_evidence, n, q_bft, signer);
}

Evidence build_evidence(NodeId node, Slot at_slot, const ChainView& view, const BftReplica& bft, std::int64_t k)
{
   Evidence w;
   w.node = node;
   w.at_slot = at_slot;
   w.bft_evidence = bft.evidence();
   w.observed_decisions = view.checkpoints();
   w.vote_transcript.reserve(bft.log().size());
   for (const auto& e : bft.log())
      w.vote_transcript.push_back(e.payload);
   for (BlockIndex i : chain_to(view.store(), view.tip()))
      w.chain.push_back(view.store().block(i));
   w.k = k;
   return w;
}

} // namespace accgadget
