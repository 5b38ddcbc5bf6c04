#pragma once
// Streamlet-style accountable BFT ordering service.
//
// Epoch leaders propose blocks of pending payloads extending a longest
// chain-notarized block; a block with q_bft votes is notarized; three
// notarized blocks of consecutive epochs in one chain finalize the middle
// block and its prefix. LOG_bft is the flattened finalized payload list.

#include <accgadget/gadget.hpp>

#include <map>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace accgadget {

inline constexpr std::uint64_t bft_genesis_digest = mix64(0x6266742d67656eULL);

struct BftBlock
{
   std::uint64_t               digest {0};
   std::uint64_t               parent {0};
   std::int64_t                epoch {0};
   std::int64_t                height {0};
   NodeId                      proposer {0};
   std::vector<CheckpointVote> payloads;
   std::uint64_t               signature {0};
};

std::uint64_t compute_bft_digest(std::uint64_t parent, std::int64_t epoch, std::int64_t height, NodeId proposer,
                                 std::span<const CheckpointVote> payloads);

struct BftVote
{
   NodeId        voter {0};
   std::int64_t  epoch {0};
   std::uint64_t digest {0};
   std::int64_t  height {0};
   std::uint64_t signature {0};

   bool operator==(const BftVote&) const = default;
};

std::uint64_t bft_vote_digest(std::int64_t epoch, std::uint64_t digest, std::int64_t height);

struct QuorumCert
{
   std::int64_t               view {0};
   std::uint64_t              block_digest {0};
   std::int64_t               height {0};
   std::vector<NodeId>        signers;      // ascending
   std::vector<std::uint64_t> signatures;   // parallel to signers
   std::uint32_t              threshold {0};

   /// Structural check: enough distinct signers, all below n.
   bool well_formed(std::uint32_t n) const;
   bool operator==(const QuorumCert&) const = default;
};

struct BftMessage
{
   enum class type : std::uint8_t { proposal, vote } what {type::vote};
   std::shared_ptr<const BftBlock> block;   // proposals
   BftVote                         vote;    // votes
};

struct BftLogEntry
{
   CheckpointVote payload;
   std::uint64_t  position {0};
   QuorumCert     cert;
};

struct BftEvidenceLink
{
   std::int64_t                epoch {0};
   std::uint64_t               digest {0};
   std::uint64_t               parent {0};
   std::int64_t                height {0};
   NodeId                      proposer {0};
   std::vector<CheckpointVote> payloads;
   QuorumCert                  qc;   // empty for genesis

   bool operator==(const BftEvidenceLink&) const = default;
};

/// Notarized chain from genesis through the block that finalized the
/// node's finalized tip; `finalized` indexes that tip.
struct BftEvidence
{
   std::vector<BftEvidenceLink> chain;
   std::size_t                  finalized {0};

   /// Payloads of the finalized prefix, deduplicated by payload id.
   std::vector<CheckpointVote> log_payloads() const;
   bool operator==(const BftEvidence&) const = default;
};

struct BftConfig
{
   std::uint32_t n {1};
   std::uint32_t q_bft {1};
   Slot          delta {1};
   Slot          epoch_len {3};
   std::uint64_t seed {0};

   /// q_bft = n - f, epoch length max(1, 3 delta).
   static BftConfig defaults(std::uint32_t n, std::uint32_t f, Slot delta, std::uint64_t seed);
   void validate() const;
};

NodeId bft_leader(std::int64_t epoch, std::uint32_t n, std::uint64_t seed);

struct BftOutput
{
   std::vector<BftMessage>  outbound;
   std::vector<BftLogEntry> finalized;

   void append(BftOutput&& other);
};

class BftReplica
{
public:
   BftReplica(BftConfig cfg, NodeId self, Signer signer, bool silent_leader = false);

   /// Adds a payload to the pending set unless already pending or ordered.
   void submit(const CheckpointVote& payload);
   BftOutput tick(Slot now);
   BftOutput receive(const BftMessage& msg, Slot now);
   /// Freezes the epoch clock and queues incoming messages while paused.
   BftOutput pause(bool paused, Slot now);

   bool paused() const { return paused_; }
   std::int64_t epoch_at(Slot now) const;
   const std::vector<BftLogEntry>& log() const { return log_; }
   std::uint64_t log_digest() const { return log_digests_.back(); }
   std::uint64_t log_prefix_digest(std::size_t len) const { return log_digests_[len]; }
   std::size_t pending_count() const { return pending_.size(); }
   std::int64_t finalized_height() const;
   std::int64_t notarized_height() const { return best_height_; }
   BftEvidence evidence() const;

private:
   struct block_info
   {
      std::shared_ptr<const BftBlock> block;
      bool                            notarized {false};
      bool                            chain_notarized {false};
      QuorumCert                      qc;
      std::vector<std::uint64_t>      children;
   };

   Slot local_time(Slot now) const;
   void handle(const BftMessage& msg, Slot now, BftOutput& out);
   void on_proposal(const std::shared_ptr<const BftBlock>& b, Slot now, BftOutput& out);
   void on_vote(const BftVote& v, Slot now, BftOutput& out);
   void insert_block(const std::shared_ptr<const BftBlock>& b, BftOutput& out);
   void check_notarized(std::uint64_t digest, BftOutput& out);
   void propagate_chain_notarized(std::uint64_t digest, BftOutput& out);
   void finalize(std::uint64_t digest, std::uint64_t finalizer, BftOutput& out);
   void try_vote(Slot now, BftOutput& out);
   void try_propose(Slot now, BftOutput& out);
   bool descends(std::uint64_t digest, std::uint64_t ancestor) const;
   std::vector<CheckpointVote> unordered_payloads(std::uint64_t parent) const;
   bool unfinalized_payloads_on(std::uint64_t tip) const;

   BftConfig cfg_;
   NodeId    self_;
   Signer    signer_;
   bool      silent_leader_;

   std::unordered_map<std::uint64_t, block_info>                            blocks_;
   std::unordered_map<std::uint64_t, std::map<NodeId, BftVote>>             tallies_;
   std::unordered_map<std::uint64_t, std::vector<std::shared_ptr<const BftBlock>>> orphans_;
   std::int64_t  best_height_ {0};
   std::uint64_t best_digest_ {bft_genesis_digest};

   std::int64_t                    voted_epoch_ {0};
   std::int64_t                    proposed_epoch_ {0};
   std::int64_t                    first_prop_epoch_ {0};
   std::shared_ptr<const BftBlock> first_prop_;
   std::map<std::int64_t, std::shared_ptr<const BftBlock>> future_props_;

   std::vector<CheckpointVote>       pending_;
   std::unordered_set<std::uint64_t> pending_ids_;
   std::unordered_set<std::uint64_t> logged_ids_;

   std::uint64_t              final_digest_ {bft_genesis_digest};
   std::uint64_t              finalizer_digest_ {bft_genesis_digest};
   std::vector<BftLogEntry>   log_;
   std::vector<std::uint64_t> log_digests_;

   bool                    paused_ {false};
   Slot                    pause_started_ {0};
   Slot                    paused_total_ {0};
   std::vector<BftMessage> queued_;
};

/// One signed vote as it appears inside a quorum certificate.
struct SignedBftVote
{
   NodeId        signer {0};
   std::int64_t  epoch {0};
   std::uint64_t digest {0};
   std::int64_t  height {0};
   std::uint64_t signature {0};

   auto operator<=>(const SignedBftVote&) const = default;
};

struct BftViolation
{
   NodeId        node {0};
   SignedBftVote first;
   SignedBftVote second;
};

/// Every provably contradictory vote pair certified by the two evidences:
/// two votes of one epoch for different blocks, or a later-epoch vote whose
/// parent is lower than the parent of an earlier-epoch vote. Throws
/// not_conflicting when the finalized payload logs are prefix-related.
std::vector<BftViolation> bft_violations(const BftEvidence& e1, const BftEvidence& e2, std::uint32_t q_bft);
std::vector<NodeId> bft_forensics(const BftEvidence& e1, const BftEvidence& e2, std::uint32_t q_bft);

/// Checks QC structure, links and signatures; throws evidence_invalid.
void verify_bft_evidence(const BftEvidence& e, std::uint32_t n, std::uint32_t q_bft, const Signer& signer);

/// Payload logs conflict iff neither is a prefix of the other (by payload id).
bool payload_logs_conflict(std::span<const CheckpointVote> a, std::span<const CheckpointVote> b);

} // namespace accgadget
