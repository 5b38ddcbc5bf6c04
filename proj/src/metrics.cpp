#include <accgadget/checkers.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

namespace accgadget {

namespace {

/// Mean slots from injection until the tx is in every later awake honest ledger.
std::pair<double, std::size_t> mean_latency(const Trace& trace, bool acc)
{
   const BlockStore& s = *trace.store;
   const Slot h = trace.horizon();
   constexpr auto none = std::numeric_limits<std::uint64_t>::max();
   std::vector<std::uint64_t> suffix(static_cast<std::size_t>(h) + 1, none);
   BlockIndex longest = 0;
   for (const auto& r : trace.rows) {
      if (!r.awake || !trace.honest(r.node))
         continue;
      const BlockIndex b = acc ? r.acc_end : r.da_end;
      auto& m = suffix[static_cast<std::size_t>(r.slot)];
      m = std::min(m, s.ledger_len(b));
      if (s.ledger_len(b) > s.ledger_len(longest))
         longest = b;
   }
   for (Slot t = h - 1; t >= 0; --t)
      suffix[static_cast<std::size_t>(t)] =
         std::min(suffix[static_cast<std::size_t>(t)], suffix[static_cast<std::size_t>(t) + 1]);
   std::unordered_map<TxId, std::uint64_t> pos;
   const auto ledger = s.ledger(longest);
   for (std::size_t i = 0; i < ledger.size(); ++i)
      pos.emplace(ledger[i], i);

   double sum = 0;
   std::size_t count = 0;
   for (const auto& tx : trace.txs) {
      auto p = pos.find(tx.tx);
      if (p == pos.end() || !trace.honest(tx.node))
         continue;
      auto it = std::upper_bound(suffix.begin() + tx.slot, suffix.end() - 1, p->second);
      if (it == suffix.end() - 1)
         continue;
      sum += static_cast<double>((it - suffix.begin()) - tx.slot);
      ++count;
   }
   return {count ? sum / static_cast<double>(count) : 0.0, count};
}

/// Honest row with the highest tip at the last slot.
std::optional<LedgerRow> final_row(const Trace& trace)
{
   if (trace.horizon() <= 0)
      return std::nullopt;
   std::optional<LedgerRow> best;
   for (NodeId v = 0; v < trace.n(); ++v) {
      const auto& r = trace.row(trace.horizon() - 1, v);
      if (!trace.honest(v))
         continue;
      if (!best || trace.store->height(r.tip) > trace.store->height(best->tip))
         best = r;
   }
   return best;
}

} // namespace

Metrics measure_metrics(const Trace& trace)
{
   Metrics m;
   if (trace.rows.empty())
      return m;
   const BlockStore& s = *trace.store;
   const double h = static_cast<double>(trace.horizon());

   std::tie(m.acc_latency_mean, m.acc_latency_samples) = mean_latency(trace, true);
   m.da_latency_mean = mean_latency(trace, false).first;

   if (auto r = final_row(trace)) {
      const auto height = static_cast<double>(s.height(r->tip));
      m.chain_growth_rate = height / h;
      std::int64_t best_da = 0;
      for (NodeId v = 0; v < trace.n(); ++v)
         if (trace.honest(v))
            best_da = std::max(best_da, s.height(trace.row(trace.horizon() - 1, v).da_end));
      m.da_growth_rate = static_cast<double>(best_da) / h;
      std::int64_t honest = 0;
      const auto chain = chain_to(s, r->tip);
      for (std::size_t i = 1; i < chain.size(); ++i)
         honest += !trace.blocks[chain[i]].adversarial;
      m.chain_quality = chain.size() > 1 ? static_cast<double>(honest) / static_cast<double>(chain.size() - 1) : 1.0;
      if (height > 0)
         m.mean_block_interval = static_cast<double>(trace.blocks[r->tip].created) / height;
   }

   std::set<Iteration> iterations;
   std::map<std::pair<Iteration, std::uint64_t>, std::set<NodeId>> accepts;
   for (const auto& v : trace.votes)
      if (v.kind == vote_kind::accept && v.block)
         accepts[{v.iteration, v.block->value}].insert(v.author);
   for (const auto& d : trace.decisions) {
      iterations.insert(d.iteration);
      if (!d.block)
         continue;
      ++m.checkpoints;
      const auto n = static_cast<std::int64_t>(accepts[{d.iteration, d.block->value}].size());
      m.accept_votes_min = m.checkpoints == 1 ? n : std::min(m.accept_votes_min, n);
      m.accept_votes_max = std::max(m.accept_votes_max, n);
   }
   m.iterations = static_cast<std::int64_t>(iterations.size());
   if (m.iterations > 0)
      m.votes_per_iteration =
         static_cast<double>(trace.votes.size() + trace.bft_votes) / static_cast<double>(m.iterations);

   for (const auto& b : trace.blocks)
      m.adversarial_blocks += b.adversarial;
   m.bft_confirm = measure_bft_confirm(trace);
   m.t_recent = trace.scenario.chain.delta + trace.scenario.gadget.T_timeout + m.bft_confirm;
   m.convergence_opportunities = count_convergence_opportunities(trace, 0, trace.horizon() - 1, false, m.t_recent);
   m.pivots = static_cast<std::int64_t>(analyze_pivots(trace, m.t_recent).size());
   return m;
}

bool SecurityReport::all_ok() const
{
   const bool da = !da_applicable || (safety_da.ok && liveness_da.ok);
   return da && safety_acc.ok && safety_bft.ok && liveness_acc.ok && prefix.ok && gap.ok && recency.ok;
}

Slot healing_bound(const Scenario& s)
{
   return std::max(s.gst, s.gat) + s.chain.delta + s.gadget.T_checkpoint;
}

SecurityReport check_all(const Trace& trace)
{
   SecurityReport rep;
   const Scenario& sc = trace.scenario;
   const Metrics m = measure_metrics(trace);

   rep.da_applicable = sc.gst == 0;
   rep.safety_da = check_safety(trace, ledger_kind::da);
   rep.safety_acc = check_safety(trace, ledger_kind::acc);
   rep.safety_bft = check_safety(trace, ledger_kind::bft);
   rep.prefix = check_prefix(trace);

   const double rate = std::max(m.chain_growth_rate, 1e-9);
   rep.T_confirm_da = static_cast<Slot>(std::ceil(4.0 * static_cast<double>(sc.chain.k) / rate)) + sc.chain.delta;
   rep.liveness_da = check_liveness(trace, ledger_kind::da, rep.T_confirm_da, sc.gst);

   if (sc.gadget_enabled) {
      rep.liveness_after = healing_bound(sc);
      rep.T_confirm_acc = 4 * (sc.chain.delta + sc.gadget.T_timeout + m.bft_confirm + sc.gadget.T_checkpoint);
      rep.liveness_acc = check_liveness(trace, ledger_kind::acc, rep.T_confirm_acc, rep.liveness_after);
      const auto events = checkpoint_events(trace);
      rep.gap = check_gap(events, sc.gadget.T_checkpoint);
      rep.recency = check_recency(trace, m.t_recent);
   } else {
      rep.liveness_acc.detail = "gadget disabled";
   }
   return rep;
}

ParamCheck validate_params(const ChainParams& chain, const GadgetParams& gadget, Slot T_confirm_bft, double epsilon)
{
   ParamCheck pc;
   const double n = chain.n;
   const double f = chain.f;
   const double p = chain.p;
   const double delta = static_cast<double>(chain.delta);
   const double T_recent = delta + static_cast<double>(gadget.T_timeout) + static_cast<double>(T_confirm_bft);
   const double T_cp = static_cast<double>(gadget.T_checkpoint);

   pc.alpha = p * (n - f);
   pc.beta = p * f;
   const double growth = (1 - epsilon) * (1 - 2 * p * n * delta) * pc.alpha;
   pc.lhs = (1 + epsilon) * pc.beta;
   pc.rhs = growth - (T_recent + 2 * delta + 1) / T_cp;
   pc.ok = pc.lhs < pc.rhs;
   pc.p_bound = delta > 0 && n > f ? (n - 2 * f) / (2 * delta * n * (n - f)) : std::numeric_limits<double>::infinity();
   const double margin = growth - pc.lhs;
   pc.min_T_checkpoint = margin > 0 ? (T_recent + 2 * delta + 1) / margin : std::numeric_limits<double>::infinity();
   if (pc.alpha <= 0)
      pc.message = "alpha = 0: no honest block production";
   else if (!pc.ok)
      pc.message = "(1+eps) beta >= rhs: liveness after healing is not guaranteed; T_checkpoint must exceed " +
                   std::to_string(pc.min_T_checkpoint);
   else
      pc.message = "ok";
   return pc;
}

double worked_checkpoint_bound(double T_timeout, double delta) { return 100.0 * (2.0 * T_timeout + 3.0 * delta) * delta; }

double acc_latency_model(double k_cp, double block_interval, double T_checkpoint)
{
   return k_cp * block_interval + T_checkpoint / 2.0;
}

double gasper_latency_model(double slots_per_epoch, double slot_time) { return 2.5 * slots_per_epoch * slot_time; }

double votes_per_checkpoint_model(double n) { return 5.0 * n; }

} // namespace accgadget
