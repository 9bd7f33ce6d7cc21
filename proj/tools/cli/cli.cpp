#include "cli.hpp"

#include <ostream>

#include "CLI11.hpp"
#include "actc/error.hpp"
#include "commands.hpp"

namespace actc::cli {

namespace {

void add_common(CLI::App* app, CommonArgs& a, bool needs_config) {
  auto* c = app->add_option("--config", a.config, "JSON configuration file");
  if (needs_config) c->required();
  app->add_option("--out", a.out, "Output directory");
  app->add_option("--set", a.sets, "Override a config key (dotted.key=value), repeatable");
  app->add_option("--seed", a.seed, "Override the run seed");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Activation-compressed training laboratory", "actc"};
  app.require_subcommand(1);

  CommonArgs train_args, profile_args, alloc_args, verify_args, bench_args, report_args;
  verify_args.out.clear();
  bench_args.out.clear();
  report_args.out = "actc_report";

  auto* train = app.add_subcommand("train", "Run the training loop");
  add_common(train, train_args, true);

  std::filesystem::path checkpoint;
  auto* profile = app.add_subcommand("profile", "Estimate per-slot sensitivities");
  add_common(profile, profile_args, true);
  profile->add_option("--checkpoint", checkpoint, "Checkpoint directory to profile instead of fresh weights");

  std::filesystem::path profile_csv;
  std::optional<double> avg_bits;
  auto* allocate = app.add_subcommand("allocate", "Assign bit widths from a sensitivity profile");
  add_common(allocate, alloc_args, false);
  allocate->add_option("--profile", profile_csv, "profile.csv written by 'actc profile'")->required();
  allocate->add_option("--avg-bits", avg_bits, "Average bits/dim budget");

  std::string suite;
  std::optional<std::size_t> draws;
  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  add_common(verify, verify_args, false);
  verify->add_option("suite", suite, "quantizer | prop1 | prop2 | additivity | allocator")->required();
  verify->add_option("--draws", draws, "Monte Carlo draws (suite-specific default)");

  std::size_t repeats = 5;
  auto* bench = app.add_subcommand("bench", "Time the codec and a training episode");
  add_common(bench, bench_args, false);
  bench->add_option("--repeats", repeats, "Calls per measurement");

  std::vector<std::filesystem::path> runs;
  auto* report = app.add_subcommand("report", "Turn run directories into plot-ready CSVs");
  add_common(report, report_args, false);
  report->add_option("runs", runs, "Run directories (each with metrics.csv)")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "actc: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_args, out);
    if (profile->parsed()) return cmd_profile(profile_args, checkpoint, out);
    if (allocate->parsed()) return cmd_allocate(alloc_args, profile_csv, avg_bits, out);
    if (verify->parsed()) return cmd_verify(suite, verify_args, draws, out);
    if (bench->parsed()) return cmd_bench(bench_args, repeats, out);
    if (report->parsed()) return cmd_report(runs, report_args, out);
  } catch (const DivergenceError& e) {
    err << "actc: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const ConfigError& e) {
    err << "actc: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InfeasibleBudget& e) {
    err << "actc: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "actc: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "actc: internal error: " << e.what() << '\n';
    return kExitFailed;
  }
  err << "actc: no command given\n";
  return kExitUsage;
}

}  // namespace actc::cli
