#include <accgadget/kernels.hpp>
#include <accgadget/sim.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <unordered_set>

namespace accgadget {

namespace {

struct Message
{
   enum class type : std::uint8_t { block, cp_proposal, bft, bft_payload, tx, inject } what {type::tx};
   BlockIndex     block {0};
   CheckpointVote vote;
   BftMessage     bft;
   TxId           tx {0};
};

struct Envelope
{
   std::uint32_t to {0};
   Message       msg;
};

struct Replica
{
   NodeId                      node {0};
   std::uint32_t               group {0};
   bool                        adversarial {false};
   bool                        primary {false};
   ChainView                   view;
   GeneratorConfig             gcfg;
   GeneratorState              gen;
   InterpreterState            interp;
   std::unique_ptr<BftReplica> bft;
   std::vector<TxId>           mempool;
   std::unordered_set<TxId>    seen_tx;
   std::vector<Message>        asleep_queue;

   explicit Replica(std::shared_ptr<BlockStore> store) : view(std::move(store)) {}
};

/// Shared private chain of a selfish-mining coalition.
struct Coalition
{
   ChainView               pub;
   BlockIndex              priv_tip {0};
   std::vector<BlockIndex> withheld;   // ascending height

   explicit Coalition(std::shared_ptr<BlockStore> store) : pub(std::move(store)) {}
};

class simulation
{
public:
   explicit simulation(const Scenario& s);
   Trace run();

private:
   std::optional<Slot> arrival(const Replica& from, const Replica& to, Slot now) const;
   void broadcast(std::uint32_t from, const Message& msg, Slot now);
   void handle(std::uint32_t r, const Message& msg, Slot now);
   void drain(Slot now);
   void gen_step(std::uint32_t r, const GeneratorEvent& ev, Slot now);
   void apply_bft(std::uint32_t r, BftOutput out, Slot now);
   void on_decision(std::uint32_t r, CheckpointDecision d, Slot now);
   void sync_pause(std::uint32_t r, Slot now);
   void produce(std::uint32_t r, Slot now);
   BlockIndex add_block(Block b, Slot now, NodeId producer, bool adversarial);
   void coalition_mine(NodeId v, Slot now);
   void coalition_observe(Slot now);
   void coalition_publish(BlockIndex b, Slot now);
   void coalition_refresh();
   void inject_tx(NodeId v, TxId tx, Slot now);
   void record(Slot now);
   bool asleep(NodeId v, Slot t) const { return asleep_[v][static_cast<std::size_t>(t)] != 0; }
   bool acts(const Replica& r) const { return !(r.adversarial && sc_.strategy == strategy_kind::crash); }

   Scenario                    sc_;
   Signer                      signer_;
   std::shared_ptr<BlockStore> store_;
   Trace                       trace_;
   std::vector<Replica>        replicas_;
   std::vector<std::uint32_t>  primary_;   // node -> replica index
   std::vector<std::vector<std::uint32_t>> replicas_of_;
   std::vector<std::vector<std::uint8_t>>  asleep_;
   std::vector<std::vector<Envelope>>      deliveries_;
   std::map<std::pair<Iteration, std::uint64_t>, std::size_t> decision_rows_;
   std::unique_ptr<Coalition>  coalition_;
   kernels::lottery_threshold  threshold_;
   std::uint64_t               lottery_key_;
};

simulation::simulation(const Scenario& s)
   : sc_(s), signer_(s.seed), store_(std::make_shared<BlockStore>()),
     threshold_(kernels::make_threshold(s.chain.p)), lottery_key_(derive_seed(s.seed, stream::lottery))
{
   const std::uint32_t n = sc_.chain.n;
   trace_.scenario = sc_;
   trace_.store = store_;
   trace_.blocks.push_back({0, 0, false});

   std::set<std::uint32_t> honest_groups;
   for (NodeId v = 0; v < n; ++v)
      if (!sc_.is_adversarial(v))
         honest_groups.insert(sc_.groups[v]);

   BftConfig bcfg;
   bcfg.n = n;
   bcfg.q_bft = sc_.effective_q_bft();
   bcfg.delta = sc_.chain.delta;
   bcfg.epoch_len = sc_.effective_epoch_len();
   bcfg.seed = sc_.seed;

   primary_.resize(n);
   replicas_of_.resize(n);
   for (NodeId v = 0; v < n; ++v) {
      const bool adv = sc_.is_adversarial(v);
      std::vector<std::uint32_t> groups {sc_.groups[v]};
      if (adv && sc_.strategy == strategy_kind::equivocate && !honest_groups.empty())
         groups.assign(honest_groups.begin(), honest_groups.end());
      const bool silent = adv && sc_.strategy == strategy_kind::selfish_boycott;
      for (std::size_t gi = 0; gi < groups.size(); ++gi) {
         Replica r(store_);
         r.node = v;
         r.group = groups[gi];
         r.adversarial = adv;
         r.primary = gi == 0;
         r.gcfg = {v, n, sc_.seed, sc_.chain.k_cp, sc_.gadget, silent};
         r.bft = std::make_unique<BftReplica>(bcfg, v, signer_, silent);
         if (gi == 0)
            primary_[v] = static_cast<std::uint32_t>(replicas_.size());
         replicas_of_[v].push_back(static_cast<std::uint32_t>(replicas_.size()));
         replicas_.push_back(std::move(r));
      }
   }

   asleep_.assign(n, std::vector<std::uint8_t>(static_cast<std::size_t>(sc_.horizon), 0));
   for (const auto& i : sc_.sleep)
      for (Slot t = std::max<Slot>(i.from, 0); t < std::min({i.to, sc_.horizon, sc_.gat}); ++t)
         asleep_[i.node][static_cast<std::size_t>(t)] = 1;
   deliveries_.resize(static_cast<std::size_t>(sc_.horizon));

   if (sc_.strategy == strategy_kind::selfish_boycott && !sc_.adversarial.empty())
      coalition_ = std::make_unique<Coalition>(store_);
}

std::optional<Slot> simulation::arrival(const Replica& from, const Replica& to, Slot now) const
{
   if (from.node == to.node)
      return std::nullopt;
   const bool adv = from.adversarial || to.adversarial;
   if (adv) {
      switch (sc_.strategy) {
      case strategy_kind::crash: return std::nullopt;
      case strategy_kind::selfish_boycott: return now;
      case strategy_kind::split_world:
      case strategy_kind::equivocate:
         if (from.group != to.group)
            return std::nullopt;
         break;
      case strategy_kind::none: break;
      }
   }
   const Slot d = sc_.chain.delta;
   if (now >= sc_.gst)
      return now + d;
   if (sc_.pre_gst_policy == delay_policy::partition && from.group == to.group)
      return now + d;
   return sc_.gst + d;
}

void simulation::broadcast(std::uint32_t from, const Message& msg, Slot now)
{
   const Replica& src = replicas_[from];
   for (std::uint32_t j = 0; j < replicas_.size(); ++j) {
      if (j == from)
         continue;
      auto at = arrival(src, replicas_[j], now);
      if (!at || *at >= sc_.horizon)
         continue;
      deliveries_[static_cast<std::size_t>(*at)].push_back({j, msg});
   }
}

void simulation::drain(Slot now)
{
   auto& q = deliveries_[static_cast<std::size_t>(now)];
   for (std::size_t i = 0; i < q.size(); ++i) {
      const Envelope env = q[i];
      Replica& r = replicas_[env.to];
      if (asleep(r.node, now))
         r.asleep_queue.push_back(env.msg);
      else
         handle(env.to, env.msg, now);
   }
   q.clear();
   q.shrink_to_fit();
}

void simulation::handle(std::uint32_t ri, const Message& msg, Slot now)
{
   Replica& r = replicas_[ri];
   if (!acts(r))
      return;
   switch (msg.what) {
   case Message::type::block: r.view.receive(msg.block); break;
   case Message::type::cp_proposal:
      if (sc_.gadget_enabled)
         gen_step(ri, GeneratorEvent::on_proposal(now, msg.vote), now);
      break;
   case Message::type::bft:
      if (sc_.gadget_enabled)
         apply_bft(ri, r.bft->receive(msg.bft, now), now);
      break;
   case Message::type::bft_payload:
      if (sc_.gadget_enabled)
         r.bft->submit(msg.vote);
      break;
   case Message::type::tx:
      if (r.seen_tx.insert(msg.tx).second)
         r.mempool.push_back(msg.tx);
      break;
   case Message::type::inject: {
      Message gossip = msg;
      gossip.what = Message::type::tx;
      handle(ri, gossip, now);
      broadcast(ri, gossip, now);
      break;
   }
   }
}

void simulation::gen_step(std::uint32_t ri, const GeneratorEvent& ev, Slot now)
{
   Replica& r = replicas_[ri];
   auto out = generator_step(std::move(r.gen), ev, r.view, r.gcfg, signer_);
   replicas_[ri].gen = std::move(out.state);
   for (const auto& a : out.actions) {
      trace_.votes.push_back({now, a.vote.author, a.vote.kind, a.vote.iteration, a.vote.block});
      Message m;
      m.vote = a.vote;
      if (a.what == GeneratorAction::type::broadcast_proposal) {
         m.what = Message::type::cp_proposal;
      } else {
         m.what = Message::type::bft_payload;
         replicas_[ri].bft->submit(a.vote);
      }
      broadcast(ri, m, now);
   }
   sync_pause(ri, now);
}

void simulation::sync_pause(std::uint32_t ri, Slot now)
{
   if (!sc_.bft_pause_while_waiting)
      return;
   Replica& r = replicas_[ri];
   const bool want = r.gen.phase == generator_phase::waiting_checkpoint;
   if (want != r.bft->paused())
      apply_bft(ri, r.bft->pause(want, now), now);
}

void simulation::apply_bft(std::uint32_t ri, BftOutput out, Slot now)
{
   for (const auto& m : out.outbound) {
      if (m.what == BftMessage::type::vote && replicas_[ri].primary)
         ++trace_.bft_votes;
      Message msg;
      msg.what = Message::type::bft;
      msg.bft = m;
      broadcast(ri, msg, now);
   }
   for (const auto& e : out.finalized) {
      Replica& r = replicas_[ri];
      if (r.primary) {
         const auto& p = e.payload;
         trace_.bft_logs.push_back({r.node, e.position, now, p.author, p.kind, p.iteration, p.block, p.payload_id()});
      }
      if (e.payload.kind == vote_kind::propose || !signer_.verify(e.payload))
         continue;
      auto step = interpreter_step(std::move(r.interp), e.payload, sc_.gadget);
      replicas_[ri].interp = std::move(step.state);
      if (step.decision) {
         step.decision->decided_at = now;
         on_decision(ri, *step.decision, now);
      }
   }
}

void simulation::on_decision(std::uint32_t ri, CheckpointDecision d, Slot now)
{
   Replica& r = replicas_[ri];
   r.view.apply_checkpoint(d);
   if (r.primary) {
      const std::pair<Iteration, std::uint64_t> key {d.iteration, d.block ? d.block->value : 0};
      auto [it, fresh] = decision_rows_.try_emplace(key, trace_.decisions.size());
      if (fresh)
         trace_.decisions.push_back({d.iteration, d.block, std::vector<Slot>(sc_.chain.n, -1)});
      auto& seen = trace_.decisions[it->second].first_observed[r.node];
      if (seen < 0)
         seen = now;
      if (coalition_ && r.adversarial && r.node == sc_.adversarial.front())
         coalition_->pub.apply_checkpoint(d);
   }
   gen_step(ri, GeneratorEvent::on_decision(now, d), now);
}

BlockIndex simulation::add_block(Block b, Slot now, NodeId producer, bool adversarial)
{
   const std::size_t before = store_->size();
   const BlockIndex idx = store_->add(std::move(b));
   if (store_->size() > before)
      trace_.blocks.push_back({now, producer, adversarial});
   return idx;
}

void simulation::produce(std::uint32_t ri, Slot now)
{
   Replica& r = replicas_[ri];
   const BlockStore& s = *store_;
   const BlockIndex tip = r.view.tip();
   const BlockIndex settled = r.view.da_block(sc_.chain.k);
   std::erase_if(r.mempool, [&](TxId tx) { return s.ledger_contains(settled, tx); });
   std::vector<TxId> payload;
   for (TxId tx : r.mempool)
      if (!s.ledger_contains(tip, tx))
         payload.push_back(tx);
   Block b;
   b.parent = s.block(tip).id;
   b.producer = r.node;
   b.slot = now;
   b.payload = std::move(payload);
   b.id = compute_block_id(b.parent, b.producer, b.slot, b.payload);
   const BlockIndex idx = add_block(std::move(b), now, r.node, r.adversarial);
   r.view.receive(idx);
   Message m;
   m.what = Message::type::block;
   m.block = idx;
   broadcast(ri, m, now);
   if (coalition_ && !r.adversarial) {
      coalition_->pub.receive(idx);
      coalition_observe(now);
   }
}

void simulation::coalition_refresh()
{
   Coalition& c = *coalition_;
   const BlockStore& s = *store_;
   const BlockIndex pub_tip = c.pub.tip();
   const bool stale = !s.is_ancestor(c.pub.checkpoint(), c.priv_tip);
   if (stale || c.withheld.empty() || s.height(c.priv_tip) < s.height(pub_tip)) {
      c.priv_tip = pub_tip;
      c.withheld.clear();
   }
}

void simulation::coalition_mine(NodeId v, Slot now)
{
   Coalition& c = *coalition_;
   coalition_refresh();
   // Further winners in the same slot cannot extend the private chain.
   if (store_->block(c.priv_tip).slot == now)
      return;
   Block b;
   b.parent = store_->block(c.priv_tip).id;
   b.producer = v;
   b.slot = now;
   b.id = compute_block_id(b.parent, b.producer, b.slot, b.payload);
   const BlockIndex idx = add_block(std::move(b), now, v, true);
   c.priv_tip = idx;
   c.withheld.push_back(idx);
}

void simulation::coalition_publish(BlockIndex b, Slot now)
{
   Coalition& c = *coalition_;
   c.pub.receive(b);
   Message m;
   m.what = Message::type::block;
   m.block = b;
   const NodeId producer = store_->block(b).producer;
   const std::uint32_t from = primary_[producer];
   replicas_[from].view.receive(b);
   broadcast(from, m, now);
}

void simulation::coalition_observe(Slot now)
{
   Coalition& c = *coalition_;
   const BlockStore& s = *store_;
   if (c.withheld.empty() || !s.is_ancestor(c.pub.checkpoint(), c.priv_tip)) {
      coalition_refresh();
      return;
   }
   const std::int64_t pub_h = s.height(c.pub.tip());
   const std::int64_t lead = s.height(c.priv_tip) - pub_h;
   if (lead < 0) {
      coalition_refresh();
      return;
   }
   std::vector<BlockIndex> release;
   if (lead <= 1) {
      release.swap(c.withheld);
   } else {
      auto keep = std::find_if(c.withheld.begin(), c.withheld.end(), [&](BlockIndex b) { return s.height(b) > pub_h; });
      release.assign(c.withheld.begin(), keep);
      c.withheld.erase(c.withheld.begin(), keep);
   }
   for (BlockIndex b : release)
      coalition_publish(b, now);
}

void simulation::inject_tx(NodeId v, TxId tx, Slot now)
{
   trace_.txs.push_back({now, v, tx});
   const std::uint32_t ri = primary_[v];
   Message m;
   m.what = Message::type::inject;
   m.tx = tx;
   if (asleep(v, now))
      replicas_[ri].asleep_queue.push_back(m);
   else
      handle(ri, m, now);
}

void simulation::record(Slot now)
{
   for (NodeId v = 0; v < sc_.chain.n; ++v) {
      const Replica& r = replicas_[primary_[v]];
      LedgerRow row;
      row.slot = now;
      row.node = v;
      row.awake = !asleep(v, now);
      row.tip = r.view.tip();
      row.da_end = r.view.da_block(sc_.chain.k);
      row.acc_end = r.view.checkpoint();
      row.bft_len = r.bft->log().size();
      row.bft_digest = r.bft->log_digest();
      trace_.rows.push_back(row);
   }
}

Trace simulation::run()
{
   const std::uint32_t n = sc_.chain.n;
   std::vector<std::uint8_t> wins(n);
   std::mt19937_64 tx_rng(hash_combine(derive_seed(sc_.seed, stream::schedule), 0x7478ULL));
   std::uniform_real_distribution<double> unit(0.0, 1.0);
   TxId next_tx = TxId {1} << 32;
   std::multimap<Slot, TxInjection> scripted;
   for (const auto& t : sc_.tx_schedule)
      scripted.emplace(t.slot, t);
   trace_.rows.reserve(static_cast<std::size_t>(sc_.horizon) * n);

   for (Slot now = 0; now < sc_.horizon; ++now) {
      for (std::uint32_t ri = 0; ri < replicas_.size(); ++ri) {
         Replica& r = replicas_[ri];
         if (r.asleep_queue.empty() || asleep(r.node, now))
            continue;
         auto queued = std::move(r.asleep_queue);
         r.asleep_queue.clear();
         for (const auto& m : queued)
            handle(ri, m, now);
      }
      drain(now);

      auto [lo, hi] = scripted.equal_range(now);
      for (auto it = lo; it != hi; ++it)
         inject_tx(it->second.node, it->second.tx, now);
      if (sc_.tx_rate > 0) {
         std::vector<NodeId> awake_honest;
         for (NodeId v = 0; v < n; ++v)
            if (!sc_.is_adversarial(v) && !asleep(v, now))
               awake_honest.push_back(v);
         const auto whole = static_cast<std::int64_t>(sc_.tx_rate);
         const double frac = sc_.tx_rate - static_cast<double>(whole);
         // Both draws happen every slot so the stream does not depend on
         // who is awake.
         const double coin = unit(tx_rng);
         const std::int64_t count = whole + (coin < frac ? 1 : 0);
         for (std::int64_t i = 0; i < count; ++i) {
            const double pick = unit(tx_rng);
            if (awake_honest.empty())
               continue;
            const auto at = std::min(awake_honest.size() - 1, static_cast<std::size_t>(pick * awake_honest.size()));
            inject_tx(awake_honest[at], next_tx++, now);
         }
      }

      if (sc_.gadget_enabled)
         for (std::uint32_t ri = 0; ri < replicas_.size(); ++ri) {
            Replica& r = replicas_[ri];
            if (asleep(r.node, now) || !acts(r))
               continue;
            apply_bft(ri, r.bft->tick(now), now);
            gen_step(ri, GeneratorEvent::tick(now), now);
         }

      // Genesis occupies slot 0.
      if (now > 0)
         kernels::lottery_batch(lottery_key_, static_cast<std::uint32_t>(now), threshold_, 0, wins);
      for (NodeId v = 0; v < n && now > 0; ++v) {
         if (!wins[v])
            continue;
         const bool adv = sc_.is_adversarial(v);
         const bool awake = !asleep(v, now);
         trace_.wins.push_back({now, v, adv, awake});
         if (!awake)
            continue;
         if (adv && coalition_) {
            coalition_mine(v, now);
            continue;
         }
         for (std::uint32_t ri : replicas_of_[v])
            if (acts(replicas_[ri]))
               produce(ri, now);
      }
      drain(now);
      record(now);
   }

   for (NodeId v : sc_.evidence_nodes) {
      const Replica& r = replicas_[primary_[v]];
      trace_.evidence.emplace(v, build_evidence(v, sc_.horizon, r.view, *r.bft, sc_.chain.k));
   }
   return std::move(trace_);
}

} // namespace

Trace run(const Scenario& scenario)
{
   Scenario s = resolve_scenario(scenario);
   simulation sim(s);
   return sim.run();
}

} // namespace accgadget
