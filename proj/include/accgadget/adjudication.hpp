#pragma once
// Adjudication: given the evidences of two nodes whose ledgers conflict,
// name nodes that provably broke the protocol.

#include <accgadget/bft.hpp>

#include <optional>
#include <string>
#include <vector>

namespace accgadget {

/// Everything a node can hand to the judge. Self-contained: the judge
/// replays the transcript and never consults simulator ground truth.
struct Evidence
{
   NodeId                          node {0};
   Slot                            at_slot {0};
   BftEvidence                     bft_evidence;
   std::vector<CheckpointDecision> observed_decisions;
   std::vector<CheckpointVote>     vote_transcript;   // LOG_bft payloads, in order
   std::vector<Block>              chain;             // genesis .. selected tip
   std::int64_t                    k {6};

   bool operator==(const Evidence&) const = default;
};

enum class proof_kind : std::uint8_t { bft_equivocation, checkpoint_double_vote, cross_iteration_inconsistency };
enum class verdict_outcome : std::uint8_t { violators_found, unattributable_conflict };

std::string to_string(proof_kind k);
std::string to_string(verdict_outcome o);

/// The signed messages that convict one node.
struct Supporting
{
   NodeId                                                  node {0};
   std::optional<std::pair<SignedBftVote, SignedBftVote>>  bft_pair;
   std::optional<std::pair<CheckpointVote, CheckpointVote>> vote_pair;
};

struct Verdict
{
   verdict_outcome           outcome {verdict_outcome::unattributable_conflict};
   std::optional<proof_kind> kind;
   std::vector<NodeId>       violators;   // ascending
   std::vector<Supporting>   supporting;  // parallel to violators
};

/// True iff neither ledger is a prefix of the other.
bool conflicting(std::span<const TxId> l1, std::span<const TxId> l2);

/// The ledger the judge attributes to an evidence: LOG_acc at the latest
/// checkpoint when the evidence carries gadget state, otherwise the k-deep
/// prefix of the carried chain.
std::vector<TxId> evidence_ledger(const Evidence& w, const GadgetParams& params);

/// Throws not_conflicting when the attributed ledgers are prefix-related.
Verdict adjudicate(const Evidence& w1, const Evidence& w2, const GadgetParams& params, std::uint32_t q_bft);

/// Checks chain linkage, block ids, transcript signatures and the BFT
/// certificate chain; throws evidence_invalid.
void verify_evidence(const Evidence& w, std::uint32_t n, std::uint32_t q_bft, const Signer& signer);

Evidence build_evidence(NodeId node, Slot at_slot, const ChainView& view, const BftReplica& bft, std::int64_t k);

} // namespace accgadget
