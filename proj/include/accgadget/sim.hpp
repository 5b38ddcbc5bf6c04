#pragma once
// Deterministic slotted simulator: network delays up to GST, sleep
// schedules up to GAT, adversary strategies, and the trace they produce.

#include <accgadget/adjudication.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace accgadget {

enum class strategy_kind : std::uint8_t { none, crash, split_world, selfish_boycott, equivocate };
enum class delay_policy : std::uint8_t { partition, maximal };

std::string to_string(strategy_kind s);
strategy_kind strategy_from_string(const std::string& s);
std::string to_string(delay_policy p);
delay_policy delay_policy_from_string(const std::string& s);

struct SleepInterval
{
   NodeId node {0};
   Slot   from {0};   // inclusive
   Slot   to {0};     // exclusive
};

struct TxInjection
{
   Slot   slot {0};
   NodeId node {0};
   TxId   tx {0};
};

struct RandomSleep
{
   bool   enabled {false};
   double mean_awake {150.0};
   double mean_asleep {60.0};
   double max_adversarial_fraction {0.45};
};

struct Scenario
{
   ChainParams   chain;
   GadgetParams  gadget;
   std::string   quorum_preset {"two-thirds"};
   std::uint32_t q_bft {0};          // 0: n - f
   Slot          bft_epoch_len {0};  // 0: max(1, 3 delta)
   bool          bft_pause_while_waiting {false};
   bool          gadget_enabled {true};

   Slot gst {0};
   Slot gat {0};
   delay_policy pre_gst_policy {delay_policy::partition};

   std::vector<NodeId>        adversarial;
   std::vector<std::uint32_t> groups;   // per node; empty: derived from the strategy
   std::vector<SleepInterval> sleep;
   RandomSleep                random_sleep;
   strategy_kind              strategy {strategy_kind::none};

   double                   tx_rate {1.0};   // injected per slot to random awake honest nodes
   std::vector<TxInjection> tx_schedule;     // explicit injections, in addition

   Slot                horizon {600};
   std::uint64_t       seed {1};
   std::vector<NodeId> evidence_nodes;   // empty: lowest node of every group

   /// Quorums from the preset unless given explicitly.
   void apply_preset();
   /// Throws config_invalid naming the violated invariant.
   void validate() const;
   std::uint32_t effective_q_bft() const { return q_bft ? q_bft : chain.n - chain.f; }
   Slot effective_epoch_len() const { return bft_epoch_len ? bft_epoch_len : std::max<Slot>(1, 3 * chain.delta); }
   bool is_adversarial(NodeId v) const;
};

/// Fills derived fields: groups, random sleep intervals, default evidence
/// nodes, odd-n sleeper for split_world. The result validates.
Scenario resolve_scenario(Scenario s);

struct LedgerRow
{
   Slot          slot {0};
   NodeId        node {0};
   bool          awake {true};
   BlockIndex    tip {0};
   BlockIndex    da_end {0};
   BlockIndex    acc_end {0};
   std::uint64_t bft_len {0};
   std::uint64_t bft_digest {0};
};

struct VoteRow
{
   Slot                   slot {0};
   NodeId                 author {0};
   vote_kind              kind {vote_kind::reject};
   Iteration              iteration {0};
   std::optional<BlockId> block;
};

struct DecisionRow
{
   Iteration              iteration {0};
   std::optional<BlockId> block;
   std::vector<Slot>      first_observed;   // per node; -1 never
};

struct TxRow
{
   Slot   slot {0};
   NodeId node {0};
   TxId   tx {0};
};

struct WinRow
{
   Slot   slot {0};
   NodeId node {0};
   bool   adversarial {false};
   bool   awake {true};
};

struct BftLogRow
{
   NodeId                 node {0};
   std::uint64_t          position {0};
   Slot                   slot {0};   // when finalized at this node
   NodeId                 author {0};
   vote_kind              kind {vote_kind::reject};
   Iteration              iteration {0};
   std::optional<BlockId> block;
   std::uint64_t          payload_id {0};
};

struct BlockMeta
{
   Slot   created {0};
   NodeId producer {0};
   bool   adversarial {false};
};

struct Trace
{
   Scenario                    scenario;
   std::shared_ptr<BlockStore> store;
   std::vector<BlockMeta>      blocks;   // parallel to store indices
   std::vector<LedgerRow>      rows;     // slot-major, n per slot
   std::vector<VoteRow>        votes;
   std::vector<DecisionRow>    decisions;
   std::vector<TxRow>          txs;
   std::vector<WinRow>         wins;
   std::vector<BftLogRow>      bft_logs;
   std::map<NodeId, Evidence>  evidence;
   std::uint64_t               bft_votes {0};   // BFT votes sent by primary replicas

   std::uint32_t n() const { return scenario.chain.n; }
   Slot horizon() const { return scenario.horizon; }
   const LedgerRow& row(Slot s, NodeId v) const { return rows[static_cast<std::size_t>(s) * n() + v]; }
   bool honest(NodeId v) const { return !scenario.is_adversarial(v); }
};

/// Ψ environment asleep test used by the simulator and the checkers.
bool scheduled_asleep(const Scenario& s, NodeId v, Slot t);

Trace run(const Scenario& scenario);

} // namespace accgadget
