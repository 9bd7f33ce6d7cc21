#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "actc/allocator.hpp"
#include "actc/checkpoint.hpp"
#include "actc/csv.hpp"
#include "actc/error.hpp"
#include "actc/quantizer.hpp"
#include "actc/sensitivity.hpp"
#include "actc/trainer.hpp"
#include "cli.hpp"
#include "suites.hpp"

namespace actc::cli {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  return f;
}

TrainConfig load_config(const CommonArgs& a) {
  if (a.config.empty()) throw ConfigError("--config is required");
  if (!std::filesystem::exists(a.config)) throw ConfigError("config file not found: " + a.config.string());
  std::vector<std::string> sets = a.sets;
  if (a.seed) sets.push_back("seed=" + std::to_string(*a.seed));
  return load_train_config(a.config, sets);
}

AllocationProblem problem_for(const ContextPlan& plan, const std::map<SlotId, double>& c,
                              const std::set<SlotId>& forced, double avg_bits, std::size_t group_size) {
  AllocationProblem p;
  p.dims = plan.activation_dims();
  for (const auto& [slot, d] : p.dims) {
    const auto it = c.find(slot);
    p.c[slot] = it == c.end() ? 0.0 : it->second;
  }
  p.forced = forced;
  p.group_size = group_size;
  p.budget_bits = budget_from_average(avg_bits, p.dims, forced);
  return p;
}

double parse_c(const std::string& s) {
  if (s == "inf") return kPinnedSensitivity;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw FormatError("c_l value '" + s + "' is not a number");
  }
}

std::string run_label(const std::filesystem::path& dir) {
  const std::filesystem::path p = dir.has_filename() ? dir : dir.parent_path();
  return p.filename().string();
}

}  // namespace

int cmd_train(const CommonArgs& a, std::ostream& out) {
  TrainConfig config = load_config(a);
  config.output_dir = a.out;
  std::filesystem::create_directories(a.out);
  const TrainResult r = train(config);
  {
    auto f = open_out(a.out / "metrics.csv");
    write_metrics_csv(f, r.metrics);
  }
  {
    auto f = open_out(a.out / "summary.json");
    f << summary_json_text(r) << '\n';
  }
  {
    auto f = open_out(a.out / "config_resolved.json");
    f << to_json_text(config) << '\n';
  }
  if (!r.refreshes.empty()) {
    auto f = open_out(a.out / "sensitivity_evolution.csv");
    write_sensitivity_evolution_csv(f, r);
  }
  {
    const std::map<SlotId, double> c = r.refreshes.empty() ? std::map<SlotId, double>{} : r.refreshes.back().profile.c;
    AllocationProblem p;
    p.dims = r.plan.activation_dims();
    for (const auto& [slot, d] : p.dims) p.c[slot] = c.contains(slot) ? c.at(slot) : 0.0;
    auto f = open_out(a.out / "scheme.csv");
    write_scheme_csv(f, p, r.final_scheme);
  }
  out << "mode " << to_string(config.mode) << ", " << config.steps << " steps, final loss " << r.final_loss;
  if (r.final_accuracy) out << ", accuracy " << *r.final_accuracy;
  out << ", alerts " << r.alert_count << '\n';
  out << "wrote " << a.out.string() << '\n';
  return kExitOk;
}

int cmd_profile(const CommonArgs& a, const std::filesystem::path& checkpoint, std::ostream& out) {
  TrainConfig config = load_config(a);
  if (config.mode == TrainMode::fp32) config.mode = TrainMode::adaptive_b;
  const ModelGraph model = config.model();
  const Dataset data = make_dataset(config.dataset, config.precision);
  const Parameters params = checkpoint.empty() ? model.init_params(derive_seed(config.seed, 0), config.precision)
                                               : load_checkpoint(checkpoint, model).params;
  const Batch batch = data.batch(sample_rows(data.size(), config.batch_size, derive_seed(config.seed, 2), 0));
  const ContextPlan plan = model.plan(config.batch_size);
  const CompressionScheme scheme = initial_scheme(config, plan);
  SensitivityOptions opt;
  opt.n_pairs = config.n_pairs;
  opt.min_dims = config.mode == TrainMode::fixed_b ? 0 : config.min_slot_dims;
  opt.pin_loss_head = config.mode != TrainMode::fixed_b && config.pin_loss_head;
  opt.mode = config.mode == TrainMode::checkpointed_adaptive ? BackwardMode::checkpointed : BackwardMode::plain;
  const SensitivityProfile prof = estimate_sensitivities(model, params, batch, scheme, derive_seed(config.seed, 3), opt);
  const AllocationProblem p = problem_for(plan, prof.c, budget_exclusions(config, plan), config.avg_bits, config.group_size);
  const CompressionScheme assigned = config.mode == TrainMode::fixed_b ? scheme : allocate_bits(p);
  std::filesystem::create_directories(a.out);
  auto f = open_out(a.out / "profile.csv");
  write_profile_csv(f, prof, plan, assigned);
  out << "profiled " << prof.c.size() << " activation slots; wrote " << (a.out / "profile.csv").string() << '\n';
  return kExitOk;
}

int cmd_allocate(const CommonArgs& a, const std::filesystem::path& profile, std::optional<double> avg_bits,
                 std::ostream& out) {
  if (profile.empty()) throw ConfigError("--profile is required");
  if (!std::filesystem::exists(profile)) throw ConfigError("profile not found: " + profile.string());
  double avg = avg_bits.value_or(4.0);
  std::size_t group = kDefaultGroupSize;
  if (!a.config.empty()) {
    const TrainConfig config = load_config(a);
    if (!avg_bits) avg = config.avg_bits;
    group = config.group_size;
  }
  const CsvTable t = read_csv(profile);
  AllocationProblem p;
  p.group_size = group;
  const std::size_t cs = t.column("slot_id"), cd = t.column("D_l"), cc = t.column("c_l");
  for (const auto& row : t.rows) {
    const SlotId id = std::stoull(row[cs]);
    p.dims[id] = std::stoull(row[cd]);
    p.c[id] = parse_c(row[cc]);
    if (std::isinf(p.c[id])) p.forced.insert(id);
  }
  if (p.dims.empty()) throw ConfigError("profile " + profile.string() + " has no slots");
  p.budget_bits = budget_from_average(avg, p.dims, p.forced);
  const CompressionScheme s = allocate_bits(p);
  std::filesystem::create_directories(a.out);
  auto f = open_out(a.out / "scheme.csv");
  write_scheme_csv(f, p, s);
  out << "predicted variance " << predicted_variance(p.c, s) << " at " << avg << " bits/dim; wrote "
      << (a.out / "scheme.csv").string() << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& suite, const CommonArgs& a, std::optional<std::size_t> draws, std::ostream& out) {
  const auto& names = suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end()) {
    throw ConfigError("unknown suite '" + suite + "'");
  }
  SuiteOptions o;
  if (a.seed) o.seed = *a.seed;
  o.draws = draws;
  const auto t0 = std::chrono::steady_clock::now();
  TheoryReport rep = run_suite(suite, o);
  rep.metadata["wall_seconds"] =
      std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  rep.metadata["seed"] = std::to_string(o.seed);
  rep.write_summary(out);
  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    auto f = open_out(a.out / ("verify_" + suite + ".csv"));
    rep.write_csv(f);
    auto s = open_out(a.out / ("verify_" + suite + "_summary.txt"));
    rep.write_summary(s);
  }
  return rep.all_pass() ? kExitOk : kExitFailed;
}

int cmd_bench(const CommonArgs& a, std::size_t repeats, std::ostream& out) {
  if (repeats == 0) throw ConfigError("--repeats must be positive");
  using clock = std::chrono::steady_clock;
  std::ostringstream csv;
  csv << "op,bits,elements,ms_per_call,melem_per_s\n";
  const std::size_t n = 1 << 20;
  Tensor x({n});
  const StreamKey k{a.seed.value_or(1), 3};
  for (std::size_t i = 0; i < n; ++i) x[i] = counter_normal(k, i);
  x.apply_precision();
  for (int b : kBitLadder) {
    QuantizedTensor q;
    auto t0 = clock::now();
    for (std::size_t r = 0; r < repeats; ++r) q = quantize(x, b, kDefaultGroupSize, {r, 0});
    const double qms = std::chrono::duration<double, std::milli>(clock::now() - t0).count() / double(repeats);
    t0 = clock::now();
    double sink = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) sink += dequantize(q)[r % n];
    const double dms = std::chrono::duration<double, std::milli>(clock::now() - t0).count() / double(repeats);
    (void)sink;
    csv << "quantize," << b << ',' << n << ',' << qms << ',' << double(n) / qms / 1e3 << '\n';
    csv << "dequantize," << b << ',' << n << ',' << dms << ',' << double(n) / dms / 1e3 << '\n';
  }
  const ModelGraph model = reference_tanh_mlp();
  const Parameters params = model.init_params(1);
  const Batch batch = reference_blobs(256, 1, Precision::single).all();
  const ContextPlan plan = model.plan(batch.size());
  for (int b : {32, 8, 4, 2}) {
    const CompressionScheme s =
        b == 32 ? CompressionScheme{} : CompressionScheme::uniform(plan.activation_slots(), b);
    const auto t0 = clock::now();
    for (std::size_t r = 0; r < repeats; ++r) (void)run_episode(model, params, batch, s, KeySet{r, {}});
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count() / double(repeats);
    csv << "episode," << b << ',' << plan.context_dims() << ',' << ms << ',' << double(plan.context_dims()) / ms / 1e3
        << '\n';
  }
  out << csv.str();
  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    auto f = open_out(a.out / "bench.csv");
    f << csv.str();
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::filesystem::path>& runs, const CommonArgs& a, std::ostream& out) {
  if (runs.empty()) throw ConfigError("report needs at least one run directory");
  struct Run {
    std::string label;
    CsvTable metrics;
    std::optional<CsvTable> evolution;
    std::optional<CsvTable> scheme;
  };
  std::vector<Run> loaded;
  std::set<std::string> labels;
  for (const auto& dir : runs) {
    const auto m = dir / "metrics.csv";
    if (!std::filesystem::exists(m)) throw ConfigError("no metrics.csv in " + dir.string());
    Run r{run_label(dir), read_csv(m), std::nullopt, std::nullopt};
    if (r.metrics.rows.empty()) throw ConfigError("metrics.csv in " + dir.string() + " is empty");
    if (!labels.insert(r.label).second) r.label += "_" + std::to_string(loaded.size());
    if (std::filesystem::exists(dir / "sensitivity_evolution.csv")) r.evolution = read_csv(dir / "sensitivity_evolution.csv");
    if (std::filesystem::exists(dir / "scheme.csv")) r.scheme = read_csv(dir / "scheme.csv");
    loaded.push_back(std::move(r));
  }
  std::filesystem::create_directories(a.out);
  {
    auto f = open_out(a.out / "sensitivity_evolution.csv");
    f << "run,refresh_step,slot_id,node_kind,D_l,c_l,bits\n";
    for (const Run& r : loaded) {
      if (!r.evolution) continue;
      for (const auto& row : r.evolution->rows) {
        f << r.label;
        for (const auto& field : row) f << ',' << field;
        f << '\n';
      }
    }
  }
  {
    // Steps present in every run, with the variance series side by side.
    std::map<long long, std::vector<std::pair<std::string, std::string>>> by_step;
    for (const Run& r : loaded) {
      const std::size_t cs = r.metrics.column("step"), cv = r.metrics.column("predicted_variance"),
                        cg = r.metrics.column("ema_grad_variance");
      for (const auto& row : r.metrics.rows) by_step[std::stoll(row[cs])].emplace_back(row[cv], row[cg]);
    }
    auto f = open_out(a.out / "variance_compare.csv");
    f << "step";
    for (const Run& r : loaded) f << ',' << r.label << "_predicted_variance," << r.label << "_ema_grad_variance";
    f << '\n';
    for (const auto& [step, vals] : by_step) {
      if (vals.size() != loaded.size()) continue;
      f << step;
      for (const auto& [v, g] : vals) f << ',' << v << ',' << g;
      f << '\n';
    }
  }
  {
    auto f = open_out(a.out / "loss_curves.csv");
    f << "run,step,loss,avg_bits_actual,compression_ratio\n";
    for (const Run& r : loaded) {
      const std::size_t cs = r.metrics.column("step"), cl = r.metrics.column("loss"),
                        cb = r.metrics.column("avg_bits_actual"), cr = r.metrics.column("compression_ratio");
      for (const auto& row : r.metrics.rows) {
        f << r.label << ',' << row[cs] << ',' << row[cl] << ',' << row[cb] << ',' << row[cr] << '\n';
      }
    }
  }
  {
    auto f = open_out(a.out / "bits_by_slot.csv");
    f << "run,slot_id,D_l,c_l,b_l\n";
    for (const Run& r : loaded) {
      if (!r.scheme) continue;
      for (const auto& row : r.scheme->rows) {
        f << r.label;
        for (const auto& field : row) f << ',' << field;
        f << '\n';
      }
    }
  }
  out << "report over " << loaded.size() << " run(s) written to " << a.out.string() << '\n';
  return kExitOk;
}

}  // namespace actc::cli
