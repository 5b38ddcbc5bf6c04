#include <accgadget/io.hpp>

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace accgadget;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
   const fs::path dir = fs::temp_directory_path() / ("accgadget_test_" + name);
   fs::remove_all(dir);
   fs::create_directories(dir);
   return dir;
}

int cli(const std::string& args)
{
   const std::string cmd = std::string(ACCGADGET_CLI) + " " + args + " >/dev/null 2>&1";
   const int status = std::system(cmd.c_str());
   return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* small_json = R"({"n": 8, "f": 1, "p": 0.03, "delta": 1, "k": 4, "k_cp": 4,
  "T_checkpoint": 40, "T_timeout": 8, "horizon": 300, "tx_rate": 0.5, "seed": 9})";

} // namespace

TEST_CASE("scenario parsing: defaults and explicit fields")
{
   const Scenario s = parse_scenario(R"({"n": 12})");
   CHECK(s.chain.n == 12);
   CHECK(s.chain.f == 0);
   CHECK(s.quorum_preset == "two-thirds");
   CHECK(s.gadget.q_accept == 8);
   CHECK(s.gadget.q_reject == 5);
   CHECK(s.gadget_enabled);

   const Scenario t = parse_scenario(R"({"n": 10, "f": 3, "quorum_preset": "n-minus-f", "q_reject": 6,
      "GST": 100, "GAT": "inf", "horizon": 500, "adversarial_set": [7, 8],
      "sleep_schedule": [{"node": 1, "from": 0, "to": 50}], "strategy": "selfish_mine+leader_boycott"})");
   CHECK(t.gadget.q_accept == 7);
   CHECK(t.gadget.q_reject == 6);
   CHECK(t.gst == 100);
   CHECK(t.gat == 500);
   CHECK(t.strategy == strategy_kind::selfish_boycott);
   REQUIRE(t.sleep.size() == 1);
   CHECK(t.sleep[0].to == 50);
}

TEST_CASE("scenario parsing: errors name the problem")
{
   CHECK_THROWS_AS(parse_scenario(R"({"f": 1})"), parse_error);
   CHECK_THROWS_AS(parse_scenario(R"({"n": 4, "bogus": 1})"), parse_error);
   CHECK_THROWS_AS(parse_scenario(R"({"n": "four"})"), parse_error);
   CHECK_THROWS_AS(parse_scenario("{\"n\": 4,\n \"p\": }"), parse_error);
   try {
      parse_scenario(R"({"n": 4, "bogus": 1})");
   } catch (const parse_error& e) {
      CHECK(std::string(e.what()).find("bogus") != std::string::npos);
   }
   try {
      parse_scenario("{\"n\": 4,\n \"p\": }");
   } catch (const parse_error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
   }
   Scenario bad = parse_scenario(R"({"n": 4, "p": 1.5})");
   CHECK_THROWS_AS(resolve_scenario(bad), config_invalid);
}

TEST_CASE("resolved scenarios round-trip through JSON")
{
   const Scenario s = resolve_scenario(parse_scenario(small_json));
   const Scenario again = resolve_scenario(parse_scenario(scenario_to_json(s)));
   CHECK(scenario_to_json(again) == scenario_to_json(s));
}

TEST_CASE("traces round-trip through the trace directory")
{
   const Scenario s = resolve_scenario(parse_scenario(small_json));
   const Trace t = run(s);
   const fs::path dir = scratch("roundtrip");
   write_trace(t, dir);
   for (const char* f : {"ledgers.csv", "votes.csv", "decisions.csv", "heads.csv", "blocks.csv", "meta.json"})
      CHECK(fs::exists(dir / f));

   const Trace back = read_trace(dir);
   CHECK(back.rows.size() == t.rows.size());
   CHECK(back.votes.size() == t.votes.size());
   CHECK(back.decisions.size() == t.decisions.size());
   CHECK(back.store->size() == t.store->size());
   CHECK(report_to_json(check_all(back), validate_params(s.chain, s.gadget, 0)) ==
         report_to_json(check_all(t), validate_params(s.chain, s.gadget, 0)));
   CHECK(metrics_to_json(measure_metrics(back)) == metrics_to_json(measure_metrics(t)));
   REQUIRE_FALSE(t.evidence.empty());
   for (const auto& [node, w] : t.evidence)
      CHECK(back.evidence.at(node) == w);

   const fs::path again = scratch("roundtrip2");
   write_trace(back, again);
   for (const char* f : {"ledgers.csv", "votes.csv", "decisions.csv"})
      CHECK(read_file(again / f) == read_file(dir / f));
}

TEST_CASE("evidence JSON carries its judging context")
{
   const Scenario s = resolve_scenario(parse_scenario(small_json));
   const Trace t = run(s);
   const auto& [node, w] = *t.evidence.begin();
   JudgeContext ctx;
   const Evidence back = evidence_from_json(evidence_to_json(w, judge_context(s)), &ctx);
   CHECK(back == w);
   CHECK(ctx.n == s.chain.n);
   CHECK(ctx.q_bft == s.effective_q_bft());
   CHECK(ctx.gadget.q_accept == s.gadget.q_accept);
   CHECK(ctx.seed == s.seed);
   CHECK_THROWS_AS(evidence_from_json("{\"node\": 1}"), parse_error);
}

TEST_CASE("cli: exit codes")
{
   const fs::path dir = scratch("cli");
   const fs::path scenario = dir / "small.json";
   write_file(scenario, small_json);
   const fs::path out = dir / "out";

   CHECK(cli("run " + scenario.string() + " --out-dir " + out.string()) == 0);
   CHECK(fs::exists(out / "report.json"));
   CHECK(fs::exists(out / "metrics.json"));
   CHECK(fs::exists(out / "trace" / "ledgers.csv"));
   CHECK(cli("check " + (out / "trace").string()) == 0);
   CHECK(cli("metrics " + (out / "trace").string()) == 0);

   CHECK(cli("") == 2);
   CHECK(cli("run " + scenario.string() + " --no-such-flag") == 2);
   CHECK(cli("run " + scenario.string() + " --quorum-preset half") == 2);
   CHECK(cli("run " + (dir / "missing.json").string()) == 2);
   write_file(dir / "broken.json", "{\"n\": ");
   CHECK(cli("run " + (dir / "broken.json").string() + " --out-dir " + (dir / "o2").string()) == 2);
   CHECK(cli("--help") == 0);

   const auto evidence = out / "trace" / "evidence_0.json";
   REQUIRE(fs::exists(evidence));
   CHECK(cli("adjudicate " + evidence.string() + " " + evidence.string()) == 1);
}

TEST_CASE("cli: an edited trace with conflicting heads fails the check")
{
   const fs::path dir = scratch("cli_edit");
   const fs::path scenario = dir / "small.json";
   write_file(scenario, small_json);
   REQUIRE(cli("run " + scenario.string() + " --out-dir " + dir.string()) == 0);
   const fs::path trace = dir / "trace";

   // Re-point node 0 at a fresh branch from slot 150 on, in both files that record heads.
   Trace t = read_trace(trace);
   Block rogue;
   rogue.parent = make_genesis().id;
   rogue.producer = 0;
   rogue.slot = 1;
   rogue.payload = {777777};
   rogue.id = compute_block_id(rogue.parent, rogue.producer, rogue.slot, rogue.payload);
   const BlockIndex r = t.store->add(rogue);
   t.blocks.push_back({1, 0, false});
   for (Slot s = 150; s < t.horizon(); ++s) {
      auto& row = t.rows[static_cast<std::size_t>(s) * t.n()];
      row.tip = row.da_end = r;
      row.acc_end = 0;
   }
   write_trace(t, trace);
   CHECK(cli("check " + trace.string()) == 1);

   // A ledgers.csv that disagrees with heads.csv is rejected as malformed.
   std::string ledgers = read_file(trace / "ledgers.csv");
   const auto pos = ledgers.find('\n', ledgers.find('\n') + 1);
   ledgers.insert(pos + 1, "0,0,5,0,deadbeef,0\n");
   write_file(trace / "ledgers.csv", ledgers);
   CHECK(cli("check " + trace.string()) == 2);
}
