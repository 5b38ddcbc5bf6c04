#include <accgadget/sim.hpp>

#include <algorithm>
#include <random>
#include <set>

namespace accgadget {

std::string to_string(strategy_kind s)
{
   switch (s) {
   case strategy_kind::none: return "none";
   case strategy_kind::crash: return "crash";
   case strategy_kind::split_world: return "split_world";
   case strategy_kind::selfish_boycott: return "selfish_boycott";
   case strategy_kind::equivocate: return "equivocate";
   }
   return "?";
}

strategy_kind strategy_from_string(const std::string& s)
{
   if (s == "none")
      return strategy_kind::none;
   if (s == "crash")
      return strategy_kind::crash;
   if (s == "split_world")
      return strategy_kind::split_world;
   if (s == "selfish_boycott" || s == "selfish_mine+leader_boycott")
      return strategy_kind::selfish_boycott;
   if (s == "equivocate")
      return strategy_kind::equivocate;
   throw config_invalid("unknown strategy '" + s + "'");
}

std::string to_string(delay_policy p) { return p == delay_policy::partition ? "partition" : "maximal"; }

delay_policy delay_policy_from_string(const std::string& s)
{
   if (s == "partition")
      return delay_policy::partition;
   if (s == "maximal")
      return delay_policy::maximal;
   throw config_invalid("unknown pre_gst_policy '" + s + "'");
}

void Scenario::apply_preset()
{
   const Slot tc = gadget.T_checkpoint;
   const Slot tt = gadget.T_timeout;
   if (quorum_preset == "two-thirds")
      gadget = GadgetParams::two_thirds(chain.n);
   else if (quorum_preset == "n-minus-f")
      gadget = GadgetParams::n_minus_f(chain.n, chain.f);
   else if (quorum_preset == "literal")
      gadget = GadgetParams::literal(chain.n);
   else
      throw config_invalid("unknown quorum_preset '" + quorum_preset + "'");
   gadget.T_checkpoint = tc;
   gadget.T_timeout = tt;
}

bool Scenario::is_adversarial(NodeId v) const
{
   return std::find(adversarial.begin(), adversarial.end(), v) != adversarial.end();
}

void Scenario::validate() const
{
   chain.validate();
   if (gadget_enabled)
      gadget.validate(chain.n);
   if (horizon < 0)
      throw config_invalid("horizon >= 0");
   if (gst < 0 || gat < 0)
      throw config_invalid("GST >= 0 and GAT >= 0");
   std::set<NodeId> adv(adversarial.begin(), adversarial.end());
   if (adv.size() != adversarial.size())
      throw config_invalid("adversarial_set has duplicates");
   for (NodeId v : adversarial)
      if (v >= chain.n)
         throw config_invalid("adversarial node " + std::to_string(v) + " >= n");
   if (!groups.empty() && groups.size() != chain.n)
      throw config_invalid("groups must list one group per node");
   for (const auto& i : sleep)
      if (i.node >= chain.n || i.from > i.to)
         throw config_invalid("sleep interval must name a node < n and have from <= to");
   for (const auto& t : tx_schedule)
      if (t.node >= chain.n || t.slot < 0)
         throw config_invalid("tx_schedule entry must name a node < n at a slot >= 0");
   for (NodeId v : evidence_nodes)
      if (v >= chain.n)
         throw config_invalid("evidence node >= n");
   if (tx_rate < 0)
      throw config_invalid("tx_rate >= 0");
   const std::uint32_t q = effective_q_bft();
   if (q == 0 || q > chain.n || 2 * static_cast<std::uint64_t>(q) <= chain.n)
      throw config_invalid("n/2 < q_bft <= n");
   if (effective_epoch_len() <= chain.delta)
      throw config_invalid("bft_epoch_len > delta");
   if (random_sleep.enabled &&
       (random_sleep.mean_awake < 1 || random_sleep.mean_asleep < 1 || random_sleep.max_adversarial_fraction <= 0 ||
        random_sleep.max_adversarial_fraction >= 1))
      throw config_invalid("random_sleep means >= 1 and 0 < max_adversarial_fraction < 1");
   // The split-world and equivocation strategies rely on more adversaries
   // than the fault bound; every other strategy respects |A| <= f.
   const bool exceeds_ok = strategy == strategy_kind::split_world || strategy == strategy_kind::equivocate;
   if (!exceeds_ok && adversarial.size() > chain.f)
      throw config_invalid("|adversarial_set| <= f");
}

bool scheduled_asleep(const Scenario& s, NodeId v, Slot t)
{
   if (t >= s.gat)
      return false;
   for (const auto& i : s.sleep)
      if (i.node == v && t >= i.from && t < i.to)
         return true;
   return false;
}

namespace {

void derive_groups(Scenario& s)
{
   const std::uint32_t n = s.chain.n;
   if (!s.groups.empty())
      return;
   s.groups.assign(n, 0);
   if (s.strategy == strategy_kind::split_world) {
      const std::uint32_t even = n - (n % 2);
      for (NodeId v = 0; v < n; ++v)
         s.groups[v] = v < even / 2 ? 0 : 1;
   } else if (s.strategy == strategy_kind::equivocate) {
      std::vector<NodeId> honest;
      for (NodeId v = 0; v < n; ++v)
         if (!s.is_adversarial(v))
            honest.push_back(v);
      const std::size_t half = (honest.size() + 1) / 2;
      for (std::size_t i = 0; i < honest.size(); ++i)
         s.groups[honest[i]] = i < half ? 0 : 1;
   }
}

/// Alternating awake/asleep spells per honest node, then repaired so the
/// adversarial share of awake nodes never exceeds the configured bound.
void derive_random_sleep(Scenario& s)
{
   if (!s.random_sleep.enabled)
      return;
   const std::uint32_t n = s.chain.n;
   const Slot until = std::min(s.gat, s.horizon);
   std::mt19937_64 rng(derive_seed(s.seed, stream::schedule));
   std::exponential_distribution<double> awake(1.0 / s.random_sleep.mean_awake);
   std::exponential_distribution<double> asleep(1.0 / s.random_sleep.mean_asleep);
   std::bernoulli_distribution starts_awake(s.random_sleep.mean_awake /
                                            (s.random_sleep.mean_awake + s.random_sleep.mean_asleep));

   std::vector<std::vector<std::uint8_t>> sleeping(n, std::vector<std::uint8_t>(static_cast<std::size_t>(until), 0));
   for (NodeId v = 0; v < n; ++v) {
      if (s.is_adversarial(v))
         continue;
      bool up = starts_awake(rng);
      Slot t = 0;
      while (t < until) {
         const Slot len = 1 + static_cast<Slot>(up ? awake(rng) : asleep(rng));
         if (!up)
            for (Slot u = t; u < std::min(until, t + len); ++u)
               sleeping[v][static_cast<std::size_t>(u)] = 1;
         t += len;
         up = !up;
      }
   }
   const double adv = static_cast<double>(s.adversarial.size());
   const double bound = s.random_sleep.max_adversarial_fraction;
   for (Slot t = 0; t < until; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      std::uint32_t awake_honest = 0;
      for (NodeId v = 0; v < n; ++v)
         if (!s.is_adversarial(v) && !sleeping[v][ti])
            ++awake_honest;
      for (NodeId v = 0; v < n && adv > bound * (adv + awake_honest); ++v)
         if (!s.is_adversarial(v) && sleeping[v][ti]) {
            sleeping[v][ti] = 0;
            ++awake_honest;
         }
   }
   for (NodeId v = 0; v < n; ++v) {
      Slot t = 0;
      while (t < until) {
         if (!sleeping[v][static_cast<std::size_t>(t)]) {
            ++t;
            continue;
         }
         Slot e = t;
         while (e < until && sleeping[v][static_cast<std::size_t>(e)])
            ++e;
         s.sleep.push_back({v, t, e});
         t = e;
      }
   }
   s.random_sleep.enabled = false;
}

} // namespace

Scenario resolve_scenario(Scenario s)
{
   if (s.chain.n == 0)
      throw config_invalid("n >= 1");
   derive_groups(s);
   if (s.strategy == strategy_kind::split_world && s.chain.n % 2 == 1) {
      const NodeId sleeper = s.chain.n - 1;
      bool listed = false;
      for (const auto& i : s.sleep)
         listed |= i.node == sleeper && i.from == 0 && i.to >= s.horizon;
      if (!listed)
         s.sleep.push_back({sleeper, 0, s.horizon});
      s.gat = std::max(s.gat, s.horizon);
   }
   derive_random_sleep(s);
   if (s.evidence_nodes.empty()) {
      std::set<std::uint32_t> seen;
      for (NodeId v = 0; v < s.chain.n; ++v)
         if (seen.insert(s.groups[v]).second)
            s.evidence_nodes.push_back(v);
   }
   s.validate();
   return s;
}

} // namespace accgadget
