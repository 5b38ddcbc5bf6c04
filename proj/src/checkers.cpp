#include <accgadget/checkers.hpp>
#include <accgadget/kernels.hpp>

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

namespace accgadget {

std::string to_string(ledger_kind k)
{
   switch (k) {
   case ledger_kind::da: return "da";
   case ledger_kind::acc: return "acc";
   case ledger_kind::bft: return "bft";
   }
   return "?";
}

namespace {

BlockIndex row_end(const LedgerRow& r, ledger_kind k) { return k == ledger_kind::acc ? r.acc_end : r.da_end; }

struct seen_end
{
   BlockIndex block {0};
   Slot       first {0};
   NodeId     node {0};
};

/// Distinct ledger ends over awake honest rows with the first slot each was held.
std::vector<seen_end> distinct_ends(const Trace& trace, ledger_kind k)
{
   std::unordered_map<BlockIndex, std::size_t> at;
   std::vector<seen_end> out;
   for (const auto& r : trace.rows) {
      if (!r.awake || !trace.honest(r.node))
         continue;
      const BlockIndex b = row_end(r, k);
      if (at.try_emplace(b, out.size()).second)
         out.push_back({b, r.slot, r.node});
   }
   return out;
}

CheckResult chain_safety(const Trace& trace, ledger_kind k)
{
   CheckResult res;
   const BlockStore& s = *trace.store;
   auto ends = distinct_ends(trace, k);
   std::sort(ends.begin(), ends.end(), [&](const seen_end& a, const seen_end& b) {
      return std::pair(s.ledger_len(a.block), a.block) < std::pair(s.ledger_len(b.block), b.block);
   });
   bool chained = true;
   for (std::size_t i = 1; i < ends.size() && chained; ++i)
      chained = s.ledger_is_prefix(ends[i - 1].block, ends[i].block);
   if (chained)
      return res;

   res.ok = false;
   for (std::size_t i = 0; i < ends.size(); ++i)
      for (std::size_t j = i + 1; j < ends.size(); ++j) {
         if (!s.ledgers_conflict(ends[i].block, ends[j].block))
            continue;
         const Slot at = std::max(ends[i].first, ends[j].first);
         if (!res.first_violation || at < *res.first_violation) {
            res.first_violation = at;
            res.detail = "node " + std::to_string(ends[i].node) + " held block " + std::to_string(ends[i].block) +
                         " from slot " + std::to_string(ends[i].first) + ", node " + std::to_string(ends[j].node) +
                         " held conflicting block " + std::to_string(ends[j].block) + " from slot " +
                         std::to_string(ends[j].first);
         }
      }
   return res;
}

struct bft_entry
{
   std::uint64_t payload {0};
   Slot          slot {0};
};

std::map<NodeId, std::vector<bft_entry>> honest_bft_logs(const Trace& trace)
{
   std::map<NodeId, std::vector<bft_entry>> logs;
   for (NodeId v = 0; v < trace.n(); ++v)
      if (trace.honest(v))
         logs[v];
   for (const auto& e : trace.bft_logs) {
      if (!trace.honest(e.node))
         continue;
      auto& log = logs[e.node];
      if (log.size() <= e.position)
         log.resize(e.position + 1);
      log[e.position] = {e.payload_id, e.slot};
   }
   return logs;
}

CheckResult bft_safety(const Trace& trace)
{
   CheckResult res;
   const auto logs = honest_bft_logs(trace);
   for (auto a = logs.begin(); a != logs.end(); ++a)
      for (auto b = std::next(a); b != logs.end(); ++b) {
         const auto& la = a->second;
         const auto& lb = b->second;
         const std::size_t m = std::min(la.size(), lb.size());
         for (std::size_t i = 0; i < m; ++i) {
            if (la[i].payload == lb[i].payload)
               continue;
            const Slot at = std::max(la[i].slot, lb[i].slot);
            if (!res.first_violation || at < *res.first_violation) {
               res.ok = false;
               res.first_violation = at;
               res.detail = "nodes " + std::to_string(a->first) + " and " + std::to_string(b->first) +
                            " finalized different payloads at log position " + std::to_string(i);
            }
            break;
         }
      }
   return res;
}

using vote_key = std::tuple<NodeId, vote_kind, Iteration, std::uint64_t, bool>;

vote_key key_of(NodeId author, vote_kind kind, Iteration c, const std::optional<BlockId>& b)
{
   return {author, kind, c, b ? b->value : 0, b.has_value()};
}

/// Per honest node, the slot at which each payload was finalized.
std::map<NodeId, std::map<vote_key, Slot>> finalize_slots(const Trace& trace)
{
   std::map<NodeId, std::map<vote_key, Slot>> out;
   for (NodeId v = 0; v < trace.n(); ++v)
      if (trace.honest(v))
         out[v];
   for (const auto& e : trace.bft_logs)
      if (trace.honest(e.node))
         out[e.node].try_emplace(key_of(e.author, e.kind, e.iteration, e.block), e.slot);
   return out;
}

/// Membership of LOG_x over time, valid when every awake honest ledger is
/// a prefix of the longest one.
struct timeline
{
   std::unordered_map<TxId, std::uint64_t> pos;
   std::vector<std::uint64_t> suffix_min;   // size horizon + 1; min ledger length over awake honest rows from s on

   std::uint64_t position(TxId tx) const
   {
      auto it = pos.find(tx);
      return it == pos.end() ? std::numeric_limits<std::uint64_t>::max() : it->second;
   }
   /// First slot >= from at which every later awake honest ledger holds position p.
   std::optional<Slot> included_from(std::uint64_t p, Slot from) const
   {
      const auto first = suffix_min.begin() + std::min<std::ptrdiff_t>(from, static_cast<std::ptrdiff_t>(suffix_min.size()) - 1);
      auto it = std::upper_bound(first, suffix_min.end() - 1, p);
      if (it == suffix_min.end() - 1)
         return std::nullopt;
      return static_cast<Slot>(it - suffix_min.begin());
   }
};

timeline make_timeline(const Trace& trace, ledger_kind k)
{
   const BlockStore& s = *trace.store;
   timeline tl;
   const Slot h = trace.horizon();
   constexpr auto none = std::numeric_limits<std::uint64_t>::max();
   tl.suffix_min.assign(static_cast<std::size_t>(h) + 1, none);
   BlockIndex longest = 0;
   for (const auto& r : trace.rows) {
      if (!r.awake || !trace.honest(r.node))
         continue;
      const BlockIndex b = row_end(r, k);
      auto& m = tl.suffix_min[static_cast<std::size_t>(r.slot)];
      m = std::min(m, s.ledger_len(b));
      if (s.ledger_len(b) > s.ledger_len(longest))
         longest = b;
   }
   for (Slot t = h - 1; t >= 0; --t) {
      const auto i = static_cast<std::size_t>(t);
      tl.suffix_min[i] = std::min(tl.suffix_min[i], tl.suffix_min[i + 1]);
   }
   const auto ledger = s.ledger(longest);
   for (std::size_t i = 0; i < ledger.size(); ++i)
      tl.pos.emplace(ledger[i], i);
   return tl;
}

bool tx_exempt(const Trace& trace, const TxRow& tx)
{
   return !trace.honest(tx.node) || !trace.row(tx.slot, tx.node).awake;
}

CheckResult chain_liveness(const Trace& trace, ledger_kind k, Slot T_confirm, Slot after, bool safe)
{
   CheckResult res;
   const Slot h = trace.horizon();
   const BlockStore& s = *trace.store;
   auto fail = [&](const TxRow& tx, Slot at, const std::string& why) {
      if (!res.first_violation || at < *res.first_violation) {
         res.ok = false;
         res.first_violation = at;
         res.detail = "tx " + std::to_string(tx.tx) + " given to node " + std::to_string(tx.node) + " at slot " +
                      std::to_string(tx.slot) + " " + why;
      }
   };

   if (safe) {
      const timeline tl = make_timeline(trace, k);
      for (const auto& tx : trace.txs) {
         if (tx_exempt(trace, tx))
            continue;
         const Slot deadline = std::max(tx.slot, after) + T_confirm;
         const auto p = tl.position(tx.tx);
         if (auto in = tl.included_from(p, tx.slot))
            res.measured = std::max(res.measured, static_cast<double>(*in - tx.slot));
         if (deadline >= h)
            continue;
         if (p >= tl.suffix_min[static_cast<std::size_t>(deadline)])
            fail(tx, deadline, "missing from an awake honest ledger at or after slot " + std::to_string(deadline));
      }
      return res;
   }

   // Ledgers disagree: test membership row by row.
   for (const auto& tx : trace.txs) {
      if (tx_exempt(trace, tx))
         continue;
      const Slot deadline = std::max(tx.slot, after) + T_confirm;
      std::unordered_map<BlockIndex, bool> has;
      for (Slot t = deadline; t < h; ++t)
         for (NodeId v = 0; v < trace.n(); ++v) {
            const auto& r = trace.row(t, v);
            if (!r.awake || !trace.honest(v))
               continue;
            const BlockIndex b = row_end(r, k);
            auto [it, fresh] = has.try_emplace(b, false);
            if (fresh)
               it->second = s.ledger_contains(b, tx.tx);
            if (!it->second) {
               fail(tx, t, "missing from node " + std::to_string(v) + " at slot " + std::to_string(t));
               t = h;
               break;
            }
         }
   }
   return res;
}

CheckResult bft_liveness(const Trace& trace, Slot T_confirm, Slot after)
{
   CheckResult res;
   const Slot h = trace.horizon();
   const auto fin = finalize_slots(trace);
   for (const auto& vote : trace.votes) {
      if (vote.kind == vote_kind::propose || !trace.honest(vote.author))
         continue;
      const Slot deadline = std::max(vote.slot, after) + T_confirm;
      const auto key = key_of(vote.author, vote.kind, vote.iteration, vote.block);
      Slot worst = 0;
      bool all = true;
      for (const auto& [v, slots] : fin) {
         auto it = slots.find(key);
         if (it == slots.end()) {
            all = false;
            if (deadline < h && !res.first_violation) {
               res.ok = false;
               res.first_violation = deadline;
               res.detail = "vote of node " + std::to_string(vote.author) + " for iteration " +
                            std::to_string(vote.iteration) + " never finalized at node " + std::to_string(v);
            }
            continue;
         }
         worst = std::max(worst, it->second);
         if (it->second > deadline && deadline < h && !res.first_violation) {
            res.ok = false;
            res.first_violation = deadline;
            res.detail = "vote of node " + std::to_string(vote.author) + " for iteration " +
                         std::to_string(vote.iteration) + " finalized late at node " + std::to_string(v);
         }
      }
      if (all)
         res.measured = std::max(res.measured, static_cast<double>(worst - vote.slot));
   }
   return res;
}

} // namespace

CheckResult check_safety(const Trace& trace, ledger_kind kind)
{
   return kind == ledger_kind::bft ? bft_safety(trace) : chain_safety(trace, kind);
}

CheckResult check_liveness(const Trace& trace, ledger_kind kind, Slot T_confirm, Slot after)
{
   if (kind == ledger_kind::bft)
      return bft_liveness(trace, T_confirm, after);
   return chain_liveness(trace, kind, T_confirm, after, check_safety(trace, kind).ok);
}

CheckResult check_prefix(const Trace& trace)
{
   CheckResult res;
   const BlockStore& s = *trace.store;
   std::set<std::pair<BlockIndex, BlockIndex>> good;
   for (const auto& r : trace.rows) {
      if (!trace.honest(r.node) || good.count({r.acc_end, r.da_end}))
         continue;
      if (!s.ledger_is_prefix(r.acc_end, r.da_end)) {
         res.ok = false;
         res.first_violation = r.slot;
         res.detail = "node " + std::to_string(r.node) + " at slot " + std::to_string(r.slot) +
                      ": LOG_acc ending at block " + std::to_string(r.acc_end) + " is not a prefix of LOG_da ending at block " +
                      std::to_string(r.da_end);
         return res;
      }
      good.insert({r.acc_end, r.da_end});
   }
   return res;
}

std::vector<CheckpointEvent> checkpoint_events(const Trace& trace)
{
   std::vector<CheckpointEvent> out;
   for (const auto& d : trace.decisions) {
      if (!d.block)
         continue;
      Slot first = -1;
      for (NodeId v = 0; v < trace.n(); ++v) {
         const Slot t = d.first_observed[v];
         if (t >= 0 && trace.honest(v) && (first < 0 || t < first))
            first = t;
      }
      if (first >= 0)
         out.push_back({d.iteration, *d.block, first});
   }
   std::sort(out.begin(), out.end(), [](const CheckpointEvent& a, const CheckpointEvent& b) {
      return std::tie(a.iteration, a.slot) < std::tie(b.iteration, b.slot);
   });
   return out;
}

CheckResult check_gap(std::span<const CheckpointEvent> events, Slot T_checkpoint)
{
   CheckResult res;
   for (std::size_t i = 1; i < events.size(); ++i) {
      const Slot gap = events[i].slot - events[i - 1].slot;
      if (gap >= T_checkpoint)
         continue;
      res.ok = false;
      res.first_violation = events[i].slot;
      res.detail = "checkpoints of iterations " + std::to_string(events[i - 1].iteration) + " and " +
                   std::to_string(events[i].iteration) + " are " + std::to_string(gap) + " slots apart";
      return res;
   }
   return res;
}

CheckResult check_recency(const Trace& trace, Slot T_recent)
{
   CheckResult res;
   const BlockStore& s = *trace.store;
   const Slot start = std::max(trace.scenario.gst, trace.scenario.gat);
   for (const auto& e : checkpoint_events(trace)) {
      if (e.slot <= start)
         continue;
      const auto b = s.find(e.block);
      bool recent = false;
      for (Slot t = std::max<Slot>(0, e.slot - T_recent); b && t <= e.slot && !recent; ++t)
         for (NodeId v = 0; v < trace.n() && !recent; ++v)
            recent = trace.honest(v) && s.is_ancestor(*b, trace.row(t, v).tip);
      if (!recent) {
         res.ok = false;
         res.first_violation = e.slot;
         res.detail = "checkpoint of iteration " + std::to_string(e.iteration) + " at slot " + std::to_string(e.slot) +
                      " was on no honest chain in the preceding " + std::to_string(T_recent) + " slots";
         return res;
      }
   }
   return res;
}

std::vector<std::uint8_t> convergence_opportunities(const Trace& trace)
{
   const auto h = static_cast<std::size_t>(std::max<Slot>(trace.horizon(), 0));
   const Slot delta = trace.scenario.chain.delta;
   std::vector<std::uint32_t> total(h, 0);
   std::vector<std::uint8_t> good(h, 0);   // the only winner is honest and awake
   for (const auto& w : trace.wins) {
      const auto t = static_cast<std::size_t>(w.slot);
      ++total[t];
      good[t] = !w.adversarial && w.awake;
   }
   std::vector<std::uint32_t> prefix(h + 1, 0);
   for (std::size_t t = 0; t < h; ++t)
      prefix[t + 1] = prefix[t] + total[t];
   std::vector<std::uint8_t> out(h, 0);
   for (std::size_t t = 0; t < h; ++t) {
      if (total[t] != 1 || !good[t])
         continue;
      const std::size_t lo = t >= static_cast<std::size_t>(delta) ? t - static_cast<std::size_t>(delta) : 0;
      const std::size_t hi = std::min(h, t + static_cast<std::size_t>(delta) + 1);
      out[t] = prefix[hi] - prefix[lo] == 1;
   }
   return out;
}

std::vector<std::pair<Slot, Slot>> inter_checkpoint_intervals(const Trace& trace, Slot T_recent)
{
   const Slot delta = trace.scenario.chain.delta;
   const Slot start = std::max(trace.scenario.gst, trace.scenario.gat);
   std::vector<Slot> stars {start};
   std::vector<Slot> later;
   for (const auto& e : checkpoint_events(trace))
      if (e.slot > start)
         later.push_back(e.slot);
   std::sort(later.begin(), later.end());
   stars.insert(stars.end(), later.begin(), later.end());

   std::vector<std::pair<Slot, Slot>> out;
   for (std::size_t l = 0; l < stars.size(); ++l) {
      const Slot lo = stars[l] + delta;
      const Slot hi = l + 1 < stars.size() ? stars[l + 1] - T_recent - delta : trace.horizon() - 1;
      if (lo <= hi)
         out.emplace_back(lo, hi);
   }
   return out;
}

namespace {

std::vector<std::uint8_t> in_intervals(const Trace& trace, Slot T_recent)
{
   std::vector<std::uint8_t> in(static_cast<std::size_t>(std::max<Slot>(trace.horizon(), 0)), 0);
   for (auto [lo, hi] : inter_checkpoint_intervals(trace, T_recent))
      for (Slot t = std::max<Slot>(lo, 0); t <= hi && t < trace.horizon(); ++t)
         in[static_cast<std::size_t>(t)] = 1;
   return in;
}

/// Prefix counts of adversarial wins and of convergence opportunities in I.
void pivot_prefixes(const Trace& trace, Slot T_recent, std::vector<std::int32_t>& ap, std::vector<std::int32_t>& cp)
{
   const auto h = static_cast<std::size_t>(std::max<Slot>(trace.horizon(), 0));
   std::vector<std::int32_t> adv(h, 0);
   for (const auto& w : trace.wins)
      if (w.adversarial)
         ++adv[static_cast<std::size_t>(w.slot)];
   const auto co = convergence_opportunities(trace);
   const auto in = in_intervals(trace, T_recent);
   ap.assign(h + 1, 0);
   cp.assign(h + 1, 0);
   for (std::size_t t = 0; t < h; ++t) {
      ap[t + 1] = ap[t] + adv[t];
      cp[t + 1] = cp[t] + (co[t] && in[t] ? 1 : 0);
   }
}

} // namespace

std::int64_t count_convergence_opportunities(const Trace& trace, Slot t1, Slot t2, bool restrict_to_I, Slot T_recent)
{
   const auto co = convergence_opportunities(trace);
   std::vector<std::uint8_t> in;
   if (restrict_to_I)
      in = in_intervals(trace, T_recent);
   std::int64_t count = 0;
   for (Slot t = std::max<Slot>(t1, 0); t <= t2 && t < trace.horizon(); ++t) {
      const auto i = static_cast<std::size_t>(t);
      count += co[i] && (!restrict_to_I || in[i]);
   }
   return count;
}

std::vector<Slot> analyze_pivots(const Trace& trace, Slot T_recent)
{
   const Slot h = trace.horizon();
   if (h <= 0)
      return {};
   const Slot delta = trace.scenario.chain.delta;
   std::vector<std::int32_t> ap, cp;
   pivot_prefixes(trace, T_recent, ap, cp);

   // A([t0,t1]) = X1[t1] - Ap[t0], C(I ∩ [t0+Δ, t1-Δ]) = X2[t1] - Cp[t0+Δ].
   const auto hs = static_cast<std::size_t>(h);
   std::vector<std::int32_t> x1(hs), x2(hs);
   for (std::size_t t = 0; t < hs; ++t) {
      x1[t] = ap[t + 1];
      const Slot c = static_cast<Slot>(t) - delta + 1;
      x2[t] = c >= 0 ? cp[static_cast<std::size_t>(c)] : 0;
   }
   std::vector<std::int32_t> diff(hs + 1, 0);
   for (Slot t0 = 0; t0 < h; ++t0) {
      const std::int32_t a0 = ap[static_cast<std::size_t>(t0)];
      const std::int32_t c0 = cp[static_cast<std::size_t>(std::min(t0 + delta, h))];
      std::int64_t t1max = -1;
      // Short windows see no convergence opportunity: any adversarial block violates.
      const Slot short_end = std::min(t0 + 2 * delta, h) - 1;
      if (short_end >= t0 && x1[static_cast<std::size_t>(short_end)] > a0)
         t1max = short_end;
      if (t0 + 2 * delta < h)
         t1max = std::max(t1max, kernels::last_index_where(x1, x2, static_cast<std::size_t>(t0 + 2 * delta), hs, a0,
                                                           a0 - c0));
      if (t1max >= t0) {
         ++diff[static_cast<std::size_t>(t0)];
         --diff[static_cast<std::size_t>(t1max) + 1];
      }
   }
   std::vector<Slot> pivots;
   std::int32_t covered = 0;
   for (std::size_t t = 0; t < hs; ++t) {
      covered += diff[t];
      if (covered == 0)
         pivots.push_back(static_cast<Slot>(t));
   }
   return pivots;
}

std::vector<Slot> analyze_pivots_naive(const Trace& trace, Slot T_recent)
{
   const Slot h = trace.horizon();
   const Slot delta = trace.scenario.chain.delta;
   std::vector<std::int32_t> ap, cp;
   pivot_prefixes(trace, T_recent, ap, cp);
   auto A = [&](Slot a, Slot b) { return ap[static_cast<std::size_t>(b + 1)] - ap[static_cast<std::size_t>(a)]; };
   auto C = [&](Slot a, Slot b) {
      a = std::max<Slot>(a, 0);
      b = std::min(b, h - 1);
      return a > b ? 0 : cp[static_cast<std::size_t>(b + 1)] - cp[static_cast<std::size_t>(a)];
   };
   std::vector<Slot> pivots;
   for (Slot t = 0; t < h; ++t) {
      bool pivot = true;
      for (Slot t0 = 0; t0 <= t && pivot; ++t0)
         for (Slot t1 = t; t1 < h && pivot; ++t1) {
            const auto a = A(t0, t1);
            pivot = a == 0 || a < C(t0 + delta, t1 - delta);
         }
      if (pivot)
         pivots.push_back(t);
   }
   return pivots;
}

Slot measure_bft_confirm(const Trace& trace)
{
   const Slot start = std::max(trace.scenario.gst, trace.scenario.gat);
   const auto fin = finalize_slots(trace);
   Slot worst = 0;
   for (const auto& vote : trace.votes) {
      if (vote.kind == vote_kind::propose || vote.slot < start || !trace.honest(vote.author))
         continue;
      const auto key = key_of(vote.author, vote.kind, vote.iteration, vote.block);
      Slot latest = 0;
      bool all = true;
      for (const auto& [v, slots] : fin) {
         auto it = slots.find(key);
         if (it == slots.end()) {
            all = false;
            break;
         }
         latest = std::max(latest, it->second);
      }
      if (all)
         worst = std::max(worst, latest - vote.slot);
   }
   return worst;
}

} // namespace accgadget
