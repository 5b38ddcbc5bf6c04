#pragma once
// Accountability gadget: the checkpoint vote generator and the checkpoint
// vote interpreter. The generator turns clock ticks, proposals and
// decisions into proposals and votes; the interpreter turns the totally
// ordered vote log into checkpoint decisions.

#include <accgadget/chain.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace accgadget {

enum class vote_kind : std::uint8_t { propose, accept, reject };

std::string to_string(vote_kind k);
vote_kind vote_kind_from_string(const std::string& s);

struct CheckpointVote
{
   vote_kind              kind {vote_kind::reject};
   Iteration              iteration {0};
   std::optional<BlockId> block;   // absent for reject
   NodeId                 author {0};
   std::uint64_t          signature {0};

   /// Payload identity used for deduplication in the ordering service.
   std::uint64_t payload_id() const;
   bool well_formed() const { return (kind == vote_kind::reject) == !block.has_value(); }

   bool operator==(const CheckpointVote&) const = default;
};

/// Simulated non-repudiable authorship. Keys are derived from the run seed;
/// honest signatures cannot be produced by other nodes inside the simulator.
class Signer
{
public:
   explicit Signer(std::uint64_t master_seed) : key_(derive_seed(master_seed, stream::signing)) {}

   std::uint64_t sign_fields(vote_kind kind, Iteration c, const std::optional<BlockId>& b, NodeId author) const;
   CheckpointVote make(vote_kind kind, Iteration c, std::optional<BlockId> b, NodeId author) const;
   bool verify(const CheckpointVote& v) const;
   std::uint64_t sign_digest(std::uint64_t digest, NodeId author) const;

private:
   std::uint64_t key_;
};

struct GadgetParams
{
   Slot          T_checkpoint {60};
   Slot          T_timeout {12};
   std::uint32_t q_accept {1};
   std::uint32_t q_reject {1};

   /// ceil(2n/3) accepts, floor(n/3)+1 rejects.
   static GadgetParams two_thirds(std::uint32_t n);
   /// ceil(2n/3) accepts, ceil(n/3) rejects: the thresholds read literally.
   static GadgetParams literal(std::uint32_t n);
   /// n-f accepts, f+1 rejects.
   static GadgetParams n_minus_f(std::uint32_t n, std::uint32_t f);

   void validate(std::uint32_t n) const;
};

NodeId cp_leader_of_iter(Iteration c, std::uint32_t n, std::uint64_t seed);

struct GeneratorConfig
{
   NodeId        self {0};
   std::uint32_t n {1};
   std::uint64_t seed {0};
   std::int64_t  k_cp {6};
   GadgetParams  gadget;
   bool          silent_leader {false};   // boycott: never broadcast own proposals
};

enum class generator_phase : std::uint8_t { idle, waiting_checkpoint, awaiting_proposal, awaiting_decision };

struct GeneratorState
{
   std::optional<BlockId>             last_cp;
   Iteration                          curr_iter {0};
   std::map<Iteration, CheckpointVote> props;   // first proposal from the authorized leader
   generator_phase                    phase {generator_phase::idle};
   Slot                               phase_deadline {0};
   bool                               acted {false};
};

struct GeneratorEvent
{
   enum class type : std::uint8_t { tick, proposal, decision } what {type::tick};
   Slot               now {0};
   CheckpointVote     proposal;
   CheckpointDecision decision;

   static GeneratorEvent tick(Slot now) { return {type::tick, now, {}, {}}; }
   static GeneratorEvent on_proposal(Slot now, CheckpointVote v) { return {type::proposal, now, std::move(v), {}}; }
   static GeneratorEvent on_decision(Slot now, CheckpointDecision d) { return {type::decision, now, {}, d}; }
};

struct GeneratorAction
{
   enum class type : std::uint8_t { broadcast_proposal, submit_vote } what {type::submit_vote};
   CheckpointVote vote;
};

struct GeneratorOutput
{
   GeneratorState               state;
   std::vector<GeneratorAction> actions;
};

bool is_valid_proposal(const CheckpointVote& proposal, const ChainView& view, std::int64_t k_cp);

GeneratorOutput generator_step(GeneratorState state, const GeneratorEvent& event, const ChainView& view,
                               const GeneratorConfig& cfg, const Signer& signer);

struct InterpreterState
{
   struct latest
   {
      bool                   accept {false};
      std::optional<BlockId> block;
   };
   Iteration                      curr_iter {0};
   std::map<NodeId, latest>       votes;
   std::map<BlockId, std::uint32_t> accept_counts;
   std::uint32_t                  reject_count {0};
};

struct InterpreterOutput
{
   InterpreterState                  state;
   std::optional<CheckpointDecision> decision;
};

/// Consumes the next vote of the ordered log. `decided_at` of the emitted
/// decision is left for the caller to stamp.
InterpreterOutput interpreter_step(InterpreterState state, const CheckpointVote& next_vote, const GadgetParams& params);

/// Replays a whole vote log; convenient for evidence checking.
std::vector<CheckpointDecision> replay_votes(std::span<const CheckpointVote> log, const GadgetParams& params);

/// Transactions of the prefix ending at the latest non-bottom checkpoint.
std::vector<TxId> ledger_acc(std::span<const CheckpointDecision> decisions, const BlockTree& tree);

} // namespace accgadget
