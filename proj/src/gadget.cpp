#include <accgadget/gadget.hpp>

namespace accgadget {

std::string to_string(vote_kind k)
{
   switch (k) {
   case vote_kind::propose: return "propose";
   case vote_kind::accept: return "accept";
   case vote_kind::reject: return "reject";
   }
   return "?";
}

vote_kind vote_kind_from_string(const std::string& s)
{
   if (s == "propose")
      return vote_kind::propose;
   if (s == "accept")
      return vote_kind::accept;
   if (s == "reject")
      return vote_kind::reject;
   throw parse_error("unknown vote kind '" + s + "'");
}

std::uint64_t CheckpointVote::payload_id() const
{
   std::uint64_t h = hash_combine(static_cast<std::uint64_t>(kind) + 1, static_cast<std::uint64_t>(iteration));
   h = hash_combine(h, block ? block->value : 0);
   h = hash_combine(h, author);
   return hash_combine(h, signature);
}

std::uint64_t Signer::sign_fields(vote_kind kind, Iteration c, const std::optional<BlockId>& b, NodeId author) const
{
   std::uint64_t h = hash_combine(key_, author);
   h = hash_combine(h, static_cast<std::uint64_t>(kind));
   h = hash_combine(h, static_cast<std::uint64_t>(c));
   return hash_combine(h, b ? b->value : 0x0b07ULL);
}

CheckpointVote Signer::make(vote_kind kind, Iteration c, std::optional<BlockId> b, NodeId author) const
{
   CheckpointVote v {kind, c, b, author, 0};
   v.signature = sign_fields(kind, c, v.block, author);
   return v;
}

bool Signer::verify(const CheckpointVote& v) const
{
   return v.well_formed() && v.signature == sign_fields(v.kind, v.iteration, v.block, v.author);
}

std::uint64_t Signer::sign_digest(std::uint64_t digest, NodeId author) const
{
   return hash_combine(hash_combine(key_ ^ 0xb17ULL, author), digest);
}

GadgetParams GadgetParams::two_thirds(std::uint32_t n)
{
   GadgetParams g;
   g.q_accept = (2 * n + 2) / 3;
   g.q_reject = n / 3 + 1;
   return g;
}

GadgetParams GadgetParams::literal(std::uint32_t n)
{
   GadgetParams g;
   g.q_accept = (2 * n + 2) / 3;
   g.q_reject = (n + 2) / 3;
   return g;
}

GadgetParams GadgetParams::n_minus_f(std::uint32_t n, std::uint32_t f)
{
   GadgetParams g;
   g.q_accept = n - f;
   g.q_reject = f + 1;
   return g;
}

void GadgetParams::validate(std::uint32_t n) const
{
   if (T_checkpoint < 0 || T_timeout < 1)
      throw config_invalid("T_checkpoint >= 0 and T_timeout >= 1");
   if (2 * static_cast<std::uint64_t>(q_accept) <= n)
      throw config_invalid("q_accept > n/2");
   if (static_cast<std::uint64_t>(q_accept) + q_reject <= n)
      throw config_invalid("q_accept + q_reject > n");
   if (q_accept > n || q_reject > n || q_reject == 0)
      throw config_invalid("1 <= q_reject, q_accept <= n");
}

NodeId cp_leader_of_iter(Iteration c, std::uint32_t n, std::uint64_t seed)
{
   if (n <= 1)
      return 0;
   const std::uint64_t h = hash_combine(derive_seed(seed, stream::cp_leader), static_cast<std::uint64_t>(c));
   return static_cast<NodeId>(h % n);
}

bool is_valid_proposal(const CheckpointVote& proposal, const ChainView& view, std::int64_t k_cp)
{
   if (proposal.kind != vote_kind::propose || !proposal.block || view.has_pending_checkpoint())
      return false;
   const BlockStore& s = view.store();
   auto b = s.find(*proposal.block);
   if (!b || !view.tree().knows(*b))
      return false;
   if (!s.is_ancestor(*b, view.tip()))
      return false;
   if (s.height(*b) > s.height(view.deep_block(k_cp)))
      return false;
   return s.is_ancestor(view.checkpoint(), *b);
}

namespace {

struct generator_machine
{
   GeneratorState&               st;
   const ChainView&              view;
   const GeneratorConfig&        cfg;
   const Signer&                 signer;
   std::vector<GeneratorAction>& out;

   void submit(vote_kind kind, std::optional<BlockId> b)
   {
      out.push_back({GeneratorAction::type::submit_vote, signer.make(kind, st.curr_iter, b, cfg.self)});
   }

   void enter(Slot now)
   {
      st.acted = false;
      if (st.last_cp) {
         st.phase = generator_phase::waiting_checkpoint;
         st.phase_deadline = now + cfg.gadget.T_checkpoint;
      } else {
         begin_voting(now);
      }
   }

   void begin_voting(Slot now)
   {
      st.phase = generator_phase::awaiting_proposal;
      st.phase_deadline = now + cfg.gadget.T_timeout;
      st.acted = false;
      if (cp_leader_of_iter(st.curr_iter, cfg.n, cfg.seed) == cfg.self && !cfg.silent_leader) {
         const BlockId tip = view.store().block(view.deep_block(cfg.k_cp)).id;
         CheckpointVote p = signer.make(vote_kind::propose, st.curr_iter, tip, cfg.self);
         out.push_back({GeneratorAction::type::broadcast_proposal, p});
         st.props.try_emplace(st.curr_iter, p);
      }
      try_act();
   }

   void try_act()
   {
      if (st.phase != generator_phase::awaiting_proposal || st.acted)
         return;
      auto it = st.props.find(st.curr_iter);
      if (it == st.props.end())
         return;
      st.acted = true;
      if (is_valid_proposal(it->second, view, cfg.k_cp))
         submit(vote_kind::accept, it->second.block);
      else
         submit(vote_kind::reject, std::nullopt);
   }

   void tick(Slot now)
   {
      if (st.phase == generator_phase::waiting_checkpoint && now >= st.phase_deadline)
         begin_voting(now);
      if (st.phase == generator_phase::awaiting_proposal && now >= st.phase_deadline) {
         submit(vote_kind::reject, std::nullopt);
         st.phase = generator_phase::awaiting_decision;
      }
   }

   void proposal(const CheckpointVote& v)
   {
      if (v.kind != vote_kind::propose || !v.block || !signer.verify(v))
         return;
      if (v.author != cp_leader_of_iter(v.iteration, cfg.n, cfg.seed) || v.iteration < st.curr_iter)
         return;
      st.props.try_emplace(v.iteration, v);
      try_act();
   }

   void decision(Slot now, const CheckpointDecision& d)
   {
      if (d.iteration != st.curr_iter)
         return;
      st.last_cp = d.block;
      st.props.erase(st.props.begin(), st.props.upper_bound(st.curr_iter));
      ++st.curr_iter;
      enter(now);
   }
};

} // namespace

GeneratorOutput generator_step(GeneratorState state, const GeneratorEvent& event, const ChainView& view,
                               const GeneratorConfig& cfg, const Signer& signer)
{
   GeneratorOutput result;
   result.state = std::move(state);
   generator_machine m {result.state, view, cfg, signer, result.actions};
   if (result.state.phase == generator_phase::idle)
      m.enter(event.now);
   switch (event.what) {
   case GeneratorEvent::type::tick: m.tick(event.now); break;
   case GeneratorEvent::type::proposal: m.proposal(event.proposal); break;
   case GeneratorEvent::type::decision: m.decision(event.now, event.decision); break;
   }
   return result;
}

InterpreterOutput interpreter_step(InterpreterState st, const CheckpointVote& v, const GadgetParams& params)
{
   InterpreterOutput out;
   if (v.iteration == st.curr_iter && v.kind != vote_kind::propose && v.well_formed()) {
      auto [it, fresh] = st.votes.try_emplace(v.author);
      auto& slot = it->second;
      if (!fresh) {
         if (slot.accept) {
            auto c = st.accept_counts.find(*slot.block);
            if (--c->second == 0)
               st.accept_counts.erase(c);
         } else {
            --st.reject_count;
         }
      }
      slot = {v.kind == vote_kind::accept, v.block};
      if (slot.accept)
         ++st.accept_counts[*v.block];
      else
         ++st.reject_count;
   }

   std::optional<BlockId> winner;
   for (const auto& [b, count] : st.accept_counts)
      if (count >= params.q_accept) {
         winner = b;
         break;
      }
   if (winner || st.reject_count >= params.q_reject) {
      out.decision = CheckpointDecision {st.curr_iter, winner, 0};
      st.curr_iter += 1;
      st.votes.clear();
      st.accept_counts.clear();
      st.reject_count = 0;
   }
   out.state = std::move(st);
   return out;
}

std::vector<CheckpointDecision> replay_votes(std::span<const CheckpointVote> log, const GadgetParams& params)
{
   std::vector<CheckpointDecision> decisions;
   InterpreterState st;
   for (const auto& v : log) {
      auto r = interpreter_step(std::move(st), v, params);
      st = std::move(r.state);
      if (r.decision)
         decisions.push_back(*r.decision);
   }
   return decisions;
}

std::vector<TxId> ledger_acc(std::span<const CheckpointDecision> decisions, const BlockTree& tree)
{
   const BlockIndex cp = latest_checkpoint(tree, decisions);
   return tree.store().ledger(cp);
}

} // namespace accgadget
