#pragma once
// Trace analyzers: safety, liveness, prefix, gap and recency checks, the
// convergence-opportunity and pivot counts, metrics and parameter checks.

#include <accgadget/sim.hpp>

#include <optional>
#include <string>
#include <vector>

namespace accgadget {

enum class ledger_kind : std::uint8_t { da, acc, bft };
std::string to_string(ledger_kind k);

struct CheckResult
{
   bool                ok {true};
   std::optional<Slot> first_violation;
   std::string         detail;
   double              measured {0.0};   // check-specific, e.g. worst confirmation time
};

CheckResult check_safety(const Trace& trace, ledger_kind kind);
/// Every tx handed to an awake honest node at t is in every awake honest
/// node's ledger at all slots from max(t, after) + T_confirm on.
CheckResult check_liveness(const Trace& trace, ledger_kind kind, Slot T_confirm, Slot after);
/// LOG_acc is a prefix of LOG_da for every honest (node, slot).
CheckResult check_prefix(const Trace& trace);

struct CheckpointEvent
{
   Iteration iteration {0};
   BlockId   block;
   Slot      slot {0};   // first honest observation
};

/// Non-bottom checkpoints ordered by iteration, with first honest observation.
std::vector<CheckpointEvent> checkpoint_events(const Trace& trace);
CheckResult check_gap(std::span<const CheckpointEvent> events, Slot T_checkpoint);
CheckResult check_recency(const Trace& trace, Slot T_recent);

/// Slots of [t1, t2] with exactly one winner, honest and awake, and no
/// winner at all in the Δ slots on either side.
std::vector<std::uint8_t> convergence_opportunities(const Trace& trace);
/// Inter-checkpoint intervals [t*_l + Δ, t*_{l+1} - T_recent - Δ]; the
/// last one runs to the horizon.
std::vector<std::pair<Slot, Slot>> inter_checkpoint_intervals(const Trace& trace, Slot T_recent);
std::int64_t count_convergence_opportunities(const Trace& trace, Slot t1, Slot t2, bool restrict_to_I, Slot T_recent);
/// Checkpoint-strong pivots.
std::vector<Slot> analyze_pivots(const Trace& trace, Slot T_recent);
/// Reference O(H^3) evaluation of the pivot condition, for tests.
std::vector<Slot> analyze_pivots_naive(const Trace& trace, Slot T_recent);

/// Worst latency from vote emission to finalization at every honest node,
/// over votes emitted at or after max(GST, GAT). 0 if none.
Slot measure_bft_confirm(const Trace& trace);

struct Metrics
{
   double       acc_latency_mean {0};
   std::size_t  acc_latency_samples {0};
   double       da_latency_mean {0};
   double       da_growth_rate {0};    // LOG_da blocks per slot
   double       chain_growth_rate {0}; // selected-chain height per slot
   double       chain_quality {0};     // honest share of the final chain
   double       mean_block_interval {0};
   double       votes_per_iteration {0};
   std::int64_t iterations {0};
   std::int64_t checkpoints {0};
   std::int64_t accept_votes_min {0};  // per successful iteration
   std::int64_t accept_votes_max {0};
   std::int64_t convergence_opportunities {0};
   std::int64_t adversarial_blocks {0};
   std::int64_t pivots {0};
   Slot         bft_confirm {0};
   Slot         t_recent {0};
};

Metrics measure_metrics(const Trace& trace);

struct SecurityReport
{
   CheckResult safety_da;
   CheckResult safety_acc;
   CheckResult safety_bft;
   CheckResult liveness_da;
   CheckResult liveness_acc;
   CheckResult prefix;
   CheckResult gap;
   CheckResult recency;
   Slot        T_confirm_da {0};
   Slot        T_confirm_acc {0};
   Slot        liveness_after {0};
   bool        da_applicable {true};   // LOG_da guarantees need a synchronous network (GST = 0)

   bool all_ok() const;
};

/// Runs every checker with the default confirmation windows:
/// LOG_da: 4 k / (honest block rate) + Δ, LOG_acc: 4 (Δ + T_timeout +
/// T_confirm_bft + T_checkpoint) after max(GST, GAT) + Δ + T_checkpoint.
SecurityReport check_all(const Trace& trace);

/// The acc-ledger healing bound max(GST, GAT) + Δ + T_checkpoint.
Slot healing_bound(const Scenario& s);

struct ParamCheck
{
   bool   ok {false};
   double alpha {0};
   double beta {0};
   double lhs {0};
   double rhs {0};
   double p_bound {0};              // (n - 2f) / (2 Δ n (n - f))
   double min_T_checkpoint {0};     // smallest T_checkpoint satisfying the inequality; inf if none
   std::string message;
};

ParamCheck validate_params(const ChainParams& chain, const GadgetParams& gadget, Slot T_confirm_bft,
                           double epsilon = 0.1);
/// Closed form 100 (2 T_timeout + 3Δ) Δ for f = n/4, ε = 0.1, p = 0.8/(3nΔ).
double worked_checkpoint_bound(double T_timeout, double delta);

/// Latency model k_cp · block_interval + T_checkpoint / 2.
double acc_latency_model(double k_cp, double block_interval, double T_checkpoint);
/// Gasper-style finality: 2.5 epochs of C slots each.
double gasper_latency_model(double slots_per_epoch, double slot_time);
/// Vote-count model: 5 n votes per T_checkpoint.
double votes_per_checkpoint_model(double n);

} // namespace accgadget
