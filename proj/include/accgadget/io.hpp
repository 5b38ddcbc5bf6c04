#pragma once
// Scenario files, trace CSVs, evidence and report documents.
//
// Trace directory layout (column order fixed, LF line endings):
//   ledgers.csv    slot,node,log_da_len,log_acc_len,log_da_digest,log_acc_digest
//   votes.csv      slot,author,kind,iteration,block
//   decisions.csv  iteration,block_or_bot,first_observed_slot_per_node   (';'-separated, -1 never)
//   heads.csv      slot,node,awake,tip,da_end,acc_end,bft_len,bft_digest
//   blocks.csv     index,id,parent,producer,slot,created,adversarial,payload
//   txs.csv        slot,node,tx
//   wins.csv       slot,node,adversarial,awake
//   bft_logs.csv   node,position,slot,author,kind,iteration,block,payload_id
//   meta.json      resolved scenario and counters
//   evidence_<node>.json

#include <accgadget/checkers.hpp>

#include <filesystem>
#include <string>

namespace accgadget {

/// Parses a scenario document. Unknown keys and type mismatches raise
/// parse_error naming the field; syntax errors name the line.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
/// Every field written explicitly, including defaults.
std::string scenario_to_json(const Scenario& s);

void write_trace(const Trace& trace, const std::filesystem::path& dir);
/// Rebuilds a trace from its directory; ledgers.csv must agree with heads.csv.
Trace read_trace(const std::filesystem::path& dir);

/// What a judge needs besides the evidence itself.
struct JudgeContext
{
   std::uint32_t n {1};
   std::uint32_t q_bft {1};
   GadgetParams  gadget;
   std::uint64_t seed {1};   // simulated public keys
};

JudgeContext judge_context(const Scenario& s);

std::string evidence_to_json(const Evidence& w, const JudgeContext& ctx);
Evidence evidence_from_json(const std::string& text, JudgeContext* ctx = nullptr);
Evidence load_evidence(const std::filesystem::path& path, JudgeContext* ctx = nullptr);

std::string verdict_to_json(const Verdict& v);
std::string report_to_json(const SecurityReport& r, const ParamCheck& params);
std::string metrics_to_json(const Metrics& m);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

} // namespace accgadget
