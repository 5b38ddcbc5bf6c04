#include <accgadget/io.hpp>

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <sstream>

namespace accgadget {

using json = nlohmann::ordered_json;

namespace {

std::string opt_block(const std::optional<BlockId>& b) { return b ? to_hex(b->value) : ""; }

std::string join_payload(std::span<const TxId> txs)
{
   std::string out;
   for (std::size_t i = 0; i < txs.size(); ++i) {
      if (i)
         out += ';';
      out += std::to_string(txs[i]);
   }
   return out;
}

/// Reads one CSV file, checking the header, and hands each row's fields to `fn`.
template <typename Fn>
void read_csv(const std::filesystem::path& path, const std::string& header, Fn fn)
{
   std::istringstream in(read_file(path));
   std::string line;
   if (!std::getline(in, line) || line != header)
      throw parse_error(path.filename().string() + " line 1: expected header '" + header + "'");
   std::size_t lineno = 1;
   std::vector<std::string> cells;
   while (std::getline(in, line)) {
      ++lineno;
      if (line.empty())
         continue;
      cells.clear();
      std::size_t start = 0;
      for (;;) {
         const auto comma = line.find(',', start);
         cells.push_back(line.substr(start, comma - start));
         if (comma == std::string::npos)
            break;
         start = comma + 1;
      }
      try {
         fn(cells);
      } catch (const std::exception& e) {
         throw parse_error(path.filename().string() + " line " + std::to_string(lineno) + ": " + e.what());
      }
   }
}

template <typename T>
T num(const std::vector<std::string>& c, std::size_t i)
{
   if (i >= c.size())
      throw parse_error("missing column " + std::to_string(i + 1));
   T v {};
   const auto& s = c[i];
   const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
   if (ec != std::errc() || p != s.data() + s.size())
      throw parse_error("column " + std::to_string(i + 1) + ": bad number '" + s + "'");
   return v;
}

std::optional<BlockId> block_cell(const std::vector<std::string>& c, std::size_t i)
{
   if (i >= c.size())
      throw parse_error("missing column " + std::to_string(i + 1));
   if (c[i].empty())
      return std::nullopt;
   return BlockId {from_hex(c[i])};
}

std::vector<std::string> split(const std::string& s, char sep)
{
   std::vector<std::string> out;
   if (s.empty())
      return out;
   std::size_t start = 0;
   for (;;) {
      const auto at = s.find(sep, start);
      out.push_back(s.substr(start, at - start));
      if (at == std::string::npos)
         return out;
      start = at + 1;
   }
}

json vote_json(const CheckpointVote& v)
{
   return {{"kind", to_string(v.kind)},
           {"iteration", v.iteration},
           {"block", v.block ? json(to_hex(v.block->value)) : json(nullptr)},
           {"author", v.author},
           {"signature", to_hex(v.signature)}};
}

CheckpointVote vote_from(const json& j)
{
   CheckpointVote v;
   v.kind = vote_kind_from_string(j.at("kind").get<std::string>());
   v.iteration = j.at("iteration").get<Iteration>();
   if (!j.at("block").is_null())
      v.block = BlockId {from_hex(j.at("block").get<std::string>())};
   v.author = j.at("author").get<NodeId>();
   v.signature = from_hex(j.at("signature").get<std::string>());
   return v;
}

json signed_bft_json(const SignedBftVote& v)
{
   return {{"signer", v.signer},
           {"epoch", v.epoch},
           {"digest", to_hex(v.digest)},
           {"height", v.height},
           {"signature", to_hex(v.signature)}};
}

json check_json(const CheckResult& r)
{
   json j {{"ok", r.ok}};
   j["first_violation"] = r.first_violation ? json(*r.first_violation) : json(nullptr);
   j["measured"] = r.measured;
   j["detail"] = r.detail;
   return j;
}

} // namespace

void write_trace(const Trace& trace, const std::filesystem::path& dir)
{
   std::filesystem::create_directories(dir);
   const BlockStore& s = *trace.store;
   {
      std::string out = "slot,node,log_da_len,log_acc_len,log_da_digest,log_acc_digest\n";
      for (const auto& r : trace.rows)
         out += std::to_string(r.slot) + ',' + std::to_string(r.node) + ',' + std::to_string(s.ledger_len(r.da_end)) +
                ',' + std::to_string(s.ledger_len(r.acc_end)) + ',' + to_hex(s.ledger_digest(r.da_end)) + ',' +
                to_hex(s.ledger_digest(r.acc_end)) + '\n';
      write_file(dir / "ledgers.csv", out);
   }
   {
      std::string out = "slot,author,kind,iteration,block\n";
      for (const auto& v : trace.votes)
         out += std::to_string(v.slot) + ',' + std::to_string(v.author) + ',' + to_string(v.kind) + ',' +
                std::to_string(v.iteration) + ',' + opt_block(v.block) + '\n';
      write_file(dir / "votes.csv", out);
   }
   {
      std::string out = "iteration,block_or_bot,first_observed_slot_per_node\n";
      for (const auto& d : trace.decisions) {
         out += std::to_string(d.iteration) + ',' + (d.block ? to_hex(d.block->value) : std::string("bot")) + ',';
         for (std::size_t i = 0; i < d.first_observed.size(); ++i)
            out += (i ? ";" : "") + std::to_string(d.first_observed[i]);
         out += '\n';
      }
      write_file(dir / "decisions.csv", out);
   }
   {
      std::string out = "slot,node,awake,tip,da_end,acc_end,bft_len,bft_digest\n";
      for (const auto& r : trace.rows)
         out += std::to_string(r.slot) + ',' + std::to_string(r.node) + ',' + (r.awake ? "1" : "0") + ',' +
                std::to_string(r.tip) + ',' + std::to_string(r.da_end) + ',' + std::to_string(r.acc_end) + ',' +
                std::to_string(r.bft_len) + ',' + to_hex(r.bft_digest) + '\n';
      write_file(dir / "heads.csv", out);
   }
   {
      std::string out = "index,id,parent,producer,slot,created,adversarial,payload\n";
      for (BlockIndex i = 0; i < s.size(); ++i) {
         const Block& b = s.block(i);
         const std::string parent = i == 0 ? "-1" : std::to_string(s.parent(i));
         out += std::to_string(i) + ',' + to_hex(b.id.value) + ',' + parent + ',' + std::to_string(b.producer) + ',' +
                std::to_string(b.slot) + ',' + std::to_string(trace.blocks[i].created) + ',' +
                (trace.blocks[i].adversarial ? "1" : "0") + ',' + join_payload(b.payload) + '\n';
      }
      write_file(dir / "blocks.csv", out);
   }
   {
      std::string out = "slot,node,tx\n";
      for (const auto& t : trace.txs)
         out += std::to_string(t.slot) + ',' + std::to_string(t.node) + ',' + std::to_string(t.tx) + '\n';
      write_file(dir / "txs.csv", out);
   }
   {
      std::string out = "slot,node,adversarial,awake\n";
      for (const auto& w : trace.wins)
         out += std::to_string(w.slot) + ',' + std::to_string(w.node) + ',' + (w.adversarial ? "1" : "0") + ',' +
                (w.awake ? "1" : "0") + '\n';
      write_file(dir / "wins.csv", out);
   }
   {
      std::string out = "node,position,slot,author,kind,iteration,block,payload_id\n";
      for (const auto& e : trace.bft_logs)
         out += std::to_string(e.node) + ',' + std::to_string(e.position) + ',' + std::to_string(e.slot) + ',' +
                std::to_string(e.author) + ',' + to_string(e.kind) + ',' + std::to_string(e.iteration) + ',' +
                opt_block(e.block) + ',' + to_hex(e.payload_id) + '\n';
      write_file(dir / "bft_logs.csv", out);
   }
   {
      json meta;
      meta["scenario"] = json::parse(scenario_to_json(trace.scenario));
      meta["bft_votes"] = trace.bft_votes;
      meta["evidence_nodes"] = json::array();
      for (const auto& [v, _] : trace.evidence)
         meta["evidence_nodes"].push_back(v);
      write_file(dir / "meta.json", meta.dump(2) + "\n");
   }
   const JudgeContext ctx = judge_context(trace.scenario);
   for (const auto& [v, w] : trace.evidence)
      write_file(dir / ("evidence_" + std::to_string(v) + ".json"), evidence_to_json(w, ctx));
}

Trace read_trace(const std::filesystem::path& dir)
{
   Trace t;
   const json meta = [&] {
      try {
         return json::parse(read_file(dir / "meta.json"));
      } catch (const nlohmann::json::exception& e) {
         throw parse_error(std::string("meta.json: ") + e.what());
      }
   }();
   try {
      t.scenario = resolve_scenario(parse_scenario(meta.at("scenario").dump()));
      t.bft_votes = meta.at("bft_votes").get<std::uint64_t>();
   } catch (const nlohmann::json::exception& e) {
      throw parse_error(std::string("meta.json: ") + e.what());
   }

   t.store = std::make_shared<BlockStore>();
   read_csv(dir / "blocks.csv", "index,id,parent,producer,slot,created,adversarial,payload", [&](const auto& c) {
      const auto index = num<std::uint64_t>(c, 0);
      const auto parent = num<std::int64_t>(c, 2);
      Block b;
      b.id = BlockId {from_hex(c.at(1))};
      b.producer = num<NodeId>(c, 3);
      b.slot = num<Slot>(c, 4);
      for (const auto& tx : split(c.at(7), ';'))
         b.payload.push_back(num<TxId>({tx}, 0));
      if (index == 0) {
         if (b.id != t.store->block(0).id)
            throw parse_error("block 0 is not genesis");
      } else {
         if (index != t.store->size() || parent < 0 || static_cast<std::uint64_t>(parent) >= index)
            throw parse_error("blocks must be listed in index order after their parents");
         b.parent = t.store->block(static_cast<BlockIndex>(parent)).id;
         if (compute_block_id(b.parent, b.producer, b.slot, b.payload) != b.id)
            throw parse_error("block id does not match its contents");
         t.store->add(std::move(b));
      }
      t.blocks.push_back({num<Slot>(c, 5), num<NodeId>(c, 3), num<int>(c, 6) != 0});
   });
   auto check_block = [&](BlockIndex b) {
      if (b >= t.store->size())
         throw parse_error("unknown block index " + std::to_string(b));
      return b;
   };

   read_csv(dir / "heads.csv", "slot,node,awake,tip,da_end,acc_end,bft_len,bft_digest", [&](const auto& c) {
      LedgerRow r;
      r.slot = num<Slot>(c, 0);
      r.node = num<NodeId>(c, 1);
      r.awake = num<int>(c, 2) != 0;
      r.tip = check_block(num<BlockIndex>(c, 3));
      r.da_end = check_block(num<BlockIndex>(c, 4));
      r.acc_end = check_block(num<BlockIndex>(c, 5));
      r.bft_len = num<std::uint64_t>(c, 6);
      r.bft_digest = from_hex(c.at(7));
      const std::size_t expect = t.rows.size();
      if (static_cast<std::size_t>(r.slot) * t.n() + r.node != expect)
         throw parse_error("rows must be slot-major with one row per node");
      t.rows.push_back(r);
   });
   if (t.rows.size() != static_cast<std::size_t>(t.horizon()) * t.n())
      throw parse_error("heads.csv: expected horizon * n rows");

   std::size_t at = 0;
   read_csv(dir / "ledgers.csv", "slot,node,log_da_len,log_acc_len,log_da_digest,log_acc_digest", [&](const auto& c) {
      if (at >= t.rows.size())
         throw parse_error("more rows than heads.csv");
      const auto& r = t.rows[at++];
      const BlockStore& s = *t.store;
      if (num<Slot>(c, 0) != r.slot || num<NodeId>(c, 1) != r.node ||
          num<std::uint64_t>(c, 2) != s.ledger_len(r.da_end) || num<std::uint64_t>(c, 3) != s.ledger_len(r.acc_end) ||
          from_hex(c.at(4)) != s.ledger_digest(r.da_end) || from_hex(c.at(5)) != s.ledger_digest(r.acc_end))
         throw parse_error("disagrees with heads.csv");
   });

   read_csv(dir / "votes.csv", "slot,author,kind,iteration,block", [&](const auto& c) {
      t.votes.push_back({num<Slot>(c, 0), num<NodeId>(c, 1), vote_kind_from_string(c.at(2)), num<Iteration>(c, 3),
                         block_cell(c, 4)});
   });
   read_csv(dir / "decisions.csv", "iteration,block_or_bot,first_observed_slot_per_node", [&](const auto& c) {
      DecisionRow d;
      d.iteration = num<Iteration>(c, 0);
      if (c.at(1) != "bot")
         d.block = BlockId {from_hex(c.at(1))};
      for (const auto& x : split(c.at(2), ';'))
         d.first_observed.push_back(num<Slot>({x}, 0));
      if (d.first_observed.size() != t.n())
         throw parse_error("expected one first-observed slot per node");
      t.decisions.push_back(std::move(d));
   });
   read_csv(dir / "txs.csv", "slot,node,tx", [&](const auto& c) {
      t.txs.push_back({num<Slot>(c, 0), num<NodeId>(c, 1), num<TxId>(c, 2)});
   });
   read_csv(dir / "wins.csv", "slot,node,adversarial,awake", [&](const auto& c) {
      t.wins.push_back({num<Slot>(c, 0), num<NodeId>(c, 1), num<int>(c, 2) != 0, num<int>(c, 3) != 0});
   });
   read_csv(dir / "bft_logs.csv", "node,position,slot,author,kind,iteration,block,payload_id", [&](const auto& c) {
      t.bft_logs.push_back({num<NodeId>(c, 0), num<std::uint64_t>(c, 1), num<Slot>(c, 2), num<NodeId>(c, 3),
                            vote_kind_from_string(c.at(4)), num<Iteration>(c, 5), block_cell(c, 6), from_hex(c.at(7))});
   });
   for (const auto& v : meta.at("evidence_nodes")) {
      const auto node = v.get<NodeId>();
      t.evidence.emplace(node, load_evidence(dir / ("evidence_" + std::to_string(node) + ".json")));
   }
   return t;
}

JudgeContext judge_context(const Scenario& s)
{
   return {s.chain.n, s.effective_q_bft(), s.gadget, s.seed};
}

std::string evidence_to_json(const Evidence& w, const JudgeContext& ctx)
{
   json j;
   j["context"] = {{"n", ctx.n},
                   {"q_bft", ctx.q_bft},
                   {"q_accept", ctx.gadget.q_accept},
                   {"q_reject", ctx.gadget.q_reject},
                   {"T_checkpoint", ctx.gadget.T_checkpoint},
                   {"T_timeout", ctx.gadget.T_timeout},
                   {"seed", ctx.seed}};
   j["node"] = w.node;
   j["at_slot"] = w.at_slot;
   j["k"] = w.k;
   j["chain"] = json::array();
   for (const auto& b : w.chain)
      j["chain"].push_back({{"id", to_hex(b.id.value)},
                            {"parent", b.parent ? json(to_hex(b.parent->value)) : json(nullptr)},
                            {"producer", b.producer},
                            {"slot", b.slot},
                            {"payload", b.payload}});
   j["observed_decisions"] = json::array();
   for (const auto& d : w.observed_decisions)
      j["observed_decisions"].push_back({{"iteration", d.iteration},
                                         {"block", d.block ? json(to_hex(d.block->value)) : json(nullptr)},
                                         {"decided_at", d.decided_at}});
   j["vote_transcript"] = json::array();
   for (const auto& v : w.vote_transcript)
      j["vote_transcript"].push_back(vote_json(v));
   json bft;
   bft["finalized"] = w.bft_evidence.finalized;
   bft["chain"] = json::array();
   for (const auto& l : w.bft_evidence.chain) {
      json link;
      link["epoch"] = l.epoch;
      link["digest"] = to_hex(l.digest);
      link["parent"] = to_hex(l.parent);
      link["height"] = l.height;
      link["proposer"] = l.proposer;
      link["payloads"] = json::array();
      for (const auto& v : l.payloads)
         link["payloads"].push_back(vote_json(v));
      std::vector<std::string> sigs;
      for (auto x : l.qc.signatures)
         sigs.push_back(to_hex(x));
      link["qc"] = {{"view", l.qc.view},
                    {"block_digest", to_hex(l.qc.block_digest)},
                    {"height", l.qc.height},
                    {"signers", l.qc.signers},
                    {"signatures", sigs},
                    {"threshold", l.qc.threshold}};
      bft["chain"].push_back(std::move(link));
   }
   j["bft_evidence"] = std::move(bft);
   return j.dump(2) + "\n";
}

Evidence evidence_from_json(const std::string& text, JudgeContext* ctx)
{
   try {
      const json j = json::parse(text);
      Evidence w;
      if (ctx) {
         const json& c = j.at("context");
         ctx->n = c.at("n").get<std::uint32_t>();
         ctx->q_bft = c.at("q_bft").get<std::uint32_t>();
         ctx->gadget.q_accept = c.at("q_accept").get<std::uint32_t>();
         ctx->gadget.q_reject = c.at("q_reject").get<std::uint32_t>();
         ctx->gadget.T_checkpoint = c.at("T_checkpoint").get<Slot>();
         ctx->gadget.T_timeout = c.at("T_timeout").get<Slot>();
         ctx->seed = c.at("seed").get<std::uint64_t>();
      }
      w.node = j.at("node").get<NodeId>();
      w.at_slot = j.at("at_slot").get<Slot>();
      w.k = j.at("k").get<std::int64_t>();
      for (const auto& b : j.at("chain")) {
         Block blk;
         blk.id = BlockId {from_hex(b.at("id").get<std::string>())};
         if (!b.at("parent").is_null())
            blk.parent = BlockId {from_hex(b.at("parent").get<std::string>())};
         blk.producer = b.at("producer").get<NodeId>();
         blk.slot = b.at("slot").get<Slot>();
         blk.payload = b.at("payload").get<std::vector<TxId>>();
         w.chain.push_back(std::move(blk));
      }
      for (const auto& d : j.at("observed_decisions")) {
         CheckpointDecision dec;
         dec.iteration = d.at("iteration").get<Iteration>();
         if (!d.at("block").is_null())
            dec.block = BlockId {from_hex(d.at("block").get<std::string>())};
         dec.decided_at = d.at("decided_at").get<Slot>();
         w.observed_decisions.push_back(dec);
      }
      for (const auto& v : j.at("vote_transcript"))
         w.vote_transcript.push_back(vote_from(v));
      const json& bft = j.at("bft_evidence");
      w.bft_evidence.finalized = bft.at("finalized").get<std::size_t>();
      for (const auto& l : bft.at("chain")) {
         BftEvidenceLink link;
         link.epoch = l.at("epoch").get<std::int64_t>();
         link.digest = from_hex(l.at("digest").get<std::string>());
         link.parent = from_hex(l.at("parent").get<std::string>());
         link.height = l.at("height").get<std::int64_t>();
         link.proposer = l.at("proposer").get<NodeId>();
         for (const auto& v : l.at("payloads"))
            link.payloads.push_back(vote_from(v));
         const json& qc = l.at("qc");
         link.qc.view = qc.at("view").get<std::int64_t>();
         link.qc.block_digest = from_hex(qc.at("block_digest").get<std::string>());
         link.qc.height = qc.at("height").get<std::int64_t>();
         link.qc.signers = qc.at("signers").get<std::vector<NodeId>>();
         for (const auto& s : qc.at("signatures"))
            link.qc.signatures.push_back(from_hex(s.get<std::string>()));
         link.qc.threshold = qc.at("threshold").get<std::uint32_t>();
         w.bft_evidence.chain.push_back(std::move(link));
      }
      return w;
   } catch (const nlohmann::json::exception& e) {
      throw parse_error(std::string("evidence: ") + e.what());
   } catch (const std::invalid_argument& e) {
      throw parse_error(std::string("evidence: ") + e.what());
   }
}

Evidence load_evidence(const std::filesystem::path& path, JudgeContext* ctx)
{
   return evidence_from_json(read_file(path), ctx);
}

std::string verdict_to_json(const Verdict& v)
{
   json j;
   j["outcome"] = to_string(v.outcome);
   j["proof_kind"] = v.kind ? json(to_string(*v.kind)) : json(nullptr);
   j["violators"] = v.violators;
   j["supporting"] = json::array();
   for (const auto& s : v.supporting) {
      json e {{"node", s.node}};
      if (s.bft_pair)
         e["bft_votes"] = {signed_bft_json(s.bft_pair->first), signed_bft_json(s.bft_pair->second)};
      if (s.vote_pair)
         e["checkpoint_votes"] = {vote_json(s.vote_pair->first), vote_json(s.vote_pair->second)};
      j["supporting"].push_back(std::move(e));
   }
   return j.dump(2) + "\n";
}

std::string report_to_json(const SecurityReport& r, const ParamCheck& params)
{
   json j;
   j["all_ok"] = r.all_ok();
   j["safety_da"] = check_json(r.safety_da);
   j["safety_acc"] = check_json(r.safety_acc);
   j["safety_bft"] = check_json(r.safety_bft);
   j["liveness_da"] = check_json(r.liveness_da);
   j["liveness_acc"] = check_json(r.liveness_acc);
   j["prefix"] = check_json(r.prefix);
   j["gap"] = check_json(r.gap);
   j["recency"] = check_json(r.recency);
   j["T_confirm_da"] = r.T_confirm_da;
   j["T_confirm_acc"] = r.T_confirm_acc;
   j["liveness_after"] = r.liveness_after;
   j["da_applicable"] = r.da_applicable;
   j["params"] = {{"ok", params.ok},
                  {"alpha", params.alpha},
                  {"beta", params.beta},
                  {"lhs", params.lhs},
                  {"rhs", params.rhs},
                  {"p_bound", params.p_bound},
                  {"min_T_checkpoint", std::isfinite(params.min_T_checkpoint) ? json(params.min_T_checkpoint) : json(nullptr)},
                  {"message", params.message}};
   return j.dump(2) + "\n";
}

std::string metrics_to_json(const Metrics& m)
{
   json j;
   j["acc_latency_mean"] = m.acc_latency_mean;
   j["acc_latency_samples"] = m.acc_latency_samples;
   j["da_latency_mean"] = m.da_latency_mean;
   j["da_growth_rate"] = m.da_growth_rate;
   j["chain_growth_rate"] = m.chain_growth_rate;
   j["chain_quality"] = m.chain_quality;
   j["mean_block_interval"] = m.mean_block_interval;
   j["votes_per_iteration"] = m.votes_per_iteration;
   j["iterations"] = m.iterations;
   j["checkpoints"] = m.checkpoints;
   j["accept_votes_min"] = m.accept_votes_min;
   j["accept_votes_max"] = m.accept_votes_max;
   j["convergence_opportunities"] = m.convergence_opportunities;
   j["adversarial_blocks"] = m.adversarial_blocks;
   j["pivots"] = m.pivots;
   j["bft_confirm"] = m.bft_confirm;
   j["t_recent"] = m.t_recent;
   return j.dump(2) + "\n";
}

} // namespace accgadget
