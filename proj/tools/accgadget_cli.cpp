// accgadget: simulate, check, adjudicate and measure.
//
//   accgadget run <scenario.json> [--seed N] [--out-dir DIR] [--quorum-preset P] [--strategy-override S]
//   accgadget check <trace-dir>
//   accgadget adjudicate <evidence1.json> <evidence2.json>
//   accgadget metrics <trace-dir>
//
// Exit codes: 0 all checks pass, 1 check failure, 2 usage or configuration error.

#include <accgadget/io.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

using namespace accgadget;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_fail = 1;
constexpr int exit_usage = 2;

std::filesystem::path out_dir(const std::string& flag)
{
   if (!flag.empty())
      return flag;
   if (const char* env = std::getenv("ACCGADGET_OUT"); env && *env)
      return env;
   return "out";
}

void print_summary(const SecurityReport& r)
{
   auto line = [](const char* name, const CheckResult& c) {
      std::cout << name << ": " << (c.ok ? "ok" : "FAIL");
      if (c.first_violation)
         std::cout << " at slot " << *c.first_violation << " (" << c.detail << ")";
      std::cout << "\n";
   };
   line("safety_da", r.safety_da);
   line("safety_acc", r.safety_acc);
   line("safety_bft", r.safety_bft);
   line("liveness_da", r.liveness_da);
   line("liveness_acc", r.liveness_acc);
   line("prefix", r.prefix);
   line("gap", r.gap);
   line("recency", r.recency);
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& dir,
            const std::string& preset, const std::string& strategy)
{
   Scenario s = load_scenario(path);
   if (seed)
      s.seed = *seed;
   if (!preset.empty()) {
      s.quorum_preset = preset;
      s.apply_preset();
   }
   if (!strategy.empty())
      s.strategy = strategy_from_string(strategy);
   s = resolve_scenario(s);

   const Trace trace = run(s);
   const SecurityReport report = check_all(trace);
   const Metrics metrics = measure_metrics(trace);
   const ParamCheck params = validate_params(s.chain, s.gadget, metrics.bft_confirm);

   const auto out = out_dir(dir);
   std::filesystem::create_directories(out);
   write_trace(trace, out / "trace");
   write_file(out / "report.json", report_to_json(report, params));
   write_file(out / "metrics.json", metrics_to_json(metrics));
   write_file(out / "scenario.resolved.json", scenario_to_json(trace.scenario));

   if (!params.ok)
      std::cerr << "warning: " << params.message << "\n";
   print_summary(report);
   std::cout << "artifacts: " << out.string() << "\n";
   return report.all_ok() ? exit_ok : exit_fail;
}

int cmd_check(const std::string& dir)
{
   const Trace trace = read_trace(dir);
   const SecurityReport report = check_all(trace);
   const ParamCheck params =
      validate_params(trace.scenario.chain, trace.scenario.gadget, measure_bft_confirm(trace));
   std::cout << report_to_json(report, params);
   print_summary(report);
   return report.all_ok() ? exit_ok : exit_fail;
}

int cmd_adjudicate(const std::string& p1, const std::string& p2)
{
   JudgeContext ctx;
   const Evidence w1 = load_evidence(p1, &ctx);
   const Evidence w2 = load_evidence(p2);
   const Signer signer(ctx.seed);
   try {
      verify_evidence(w1, ctx.n, ctx.q_bft, signer);
      verify_evidence(w2, ctx.n, ctx.q_bft, signer);
   } catch (const evidence_invalid& e) {
      std::cerr << "evidence rejected: " << e.what() << "\n";
      return exit_fail;
   }
   try {
      std::cout << verdict_to_json(adjudicate(w1, w2, ctx.gadget, ctx.q_bft));
   } catch (const not_conflicting& e) {
      std::cerr << "not conflicting: " << e.what() << "\n";
      return exit_fail;
   }
   return exit_ok;
}

int cmd_metrics(const std::string& dir)
{
   std::cout << metrics_to_json(measure_metrics(read_trace(dir)));
   return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
   CLI::App app {"Accountable checkpointing gadget simulator"};
   app.require_subcommand(1);

   std::string scenario_path, dir, preset, strategy;
   std::optional<std::uint64_t> seed;
   auto* run_cmd = app.add_subcommand("run", "simulate a scenario, check it and write artifacts");
   run_cmd->add_option("scenario", scenario_path, "scenario file")->required();
   run_cmd->add_option("--seed", seed, "override the scenario seed");
   run_cmd->add_option("--out-dir", dir, "artifact directory (default $ACCGADGET_OUT or ./out)");
   run_cmd->add_option("--quorum-preset", preset, "gadget quorums")
      ->check(CLI::IsMember({"two-thirds", "n-minus-f", "literal"}));
   run_cmd->add_option("--strategy-override", strategy, "adversary strategy")
      ->check(CLI::IsMember({"none", "crash", "split_world", "selfish_boycott", "selfish_mine+leader_boycott",
                             "equivocate"}));

   std::string trace_dir;
   auto* check_cmd = app.add_subcommand("check", "re-run the checkers on a trace directory");
   check_cmd->add_option("trace", trace_dir, "trace directory")->required();

   std::string ev1, ev2;
   auto* adj_cmd = app.add_subcommand("adjudicate", "judge two evidence files");
   adj_cmd->add_option("evidence1", ev1)->required();
   adj_cmd->add_option("evidence2", ev2)->required();

   std::string metrics_dir;
   auto* metrics_cmd = app.add_subcommand("metrics", "compute metrics of a trace directory");
   metrics_cmd->add_option("trace", metrics_dir, "trace directory")->required();

   try {
      app.parse(argc, argv);
   } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
   } catch (const CLI::ParseError& e) {
      app.exit(e);
      return exit_usage;
   }

   try {
      if (*run_cmd)
         return cmd_run(scenario_path, seed, dir, preset, strategy);
      if (*check_cmd)
         return cmd_check(trace_dir);
      if (*adj_cmd)
         return cmd_adjudicate(ev1, ev2);
      if (*metrics_cmd)
         return cmd_metrics(metrics_dir);
   } catch (const parse_error& e) {
      std::cerr << "parse error: " << e.what() << "\n";
      return exit_usage;
   } catch (const config_invalid& e) {
      std::cerr << "invalid configuration: " << e.what() << "\n";
      return exit_usage;
   } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return exit_usage;
   }
   return exit_usage;
}
