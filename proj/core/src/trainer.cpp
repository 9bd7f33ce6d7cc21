#include "actc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "actc/checkpoint.hpp"
#include "actc/error.hpp"
#include "json_util.hpp"

namespace actc {

namespace {

constexpr double kVarianceFloor = 1e-12;

/// Largest ladder width not above `avg_bits`, the smallest one if none is.
int uniform_width(double avg_bits) {
  int best = kBitLadder.front();
  for (int b : kBitLadder) {
    if (static_cast<double>(b) <= avg_bits) best = b;
  }
  return best;
}

bool adaptive(TrainMode m) { return m == TrainMode::adaptive_b || m == TrainMode::checkpointed_adaptive; }

SensitivityOptions profile_options(const TrainConfig& c, std::int64_t step) {
  SensitivityOptions o;
  o.n_pairs = c.n_pairs;
  o.ema_decay = c.sensitivity_ema_decay;
  o.step = step;
  o.mode = c.mode == TrainMode::checkpointed_adaptive ? BackwardMode::checkpointed : BackwardMode::plain;
  if (adaptive(c.mode)) {
    o.min_dims = c.min_slot_dims;
    o.pin_loss_head = c.pin_loss_head;
  } else {
    // Fixed widths quantize every slot, so every slot is measured.
    o.min_dims = 0;
    o.pin_loss_head = false;
  }
  return o;
}

double average_free_bits(const CompressionScheme& s, const ContextPlan& plan, const std::set<SlotId>& excluded) {
  std::map<SlotId, std::size_t> dims;
  for (const auto& [slot, d] : plan.activation_dims()) {
    if (!excluded.contains(slot)) dims[slot] = d;
  }
  return dims.empty() ? static_cast<double>(kFullPrecisionBits) : s.average_bits(dims);
}

void check_data(const ModelGraph& model, const Dataset& data) {
  if (data.inputs.cols() != model.input_dim()) {
    throw ConfigError("dataset has " + std::to_string(data.inputs.cols()) + " features, model expects " +
                      std::to_string(model.input_dim()));
  }
  if (model.loss_kind() == LossKind::softmax_ce) {
    if (!data.is_classification()) throw ConfigError("softmax_ce model needs a classification dataset");
    if (model.output_dim() != data.num_classes) {
      throw ConfigError("model has " + std::to_string(model.output_dim()) + " outputs for " +
                        std::to_string(data.num_classes) + " classes");
    }
  } else {
    if (data.is_classification()) throw ConfigError("mse model needs a regression dataset");
    if (model.output_dim() != data.targets.cols()) throw ConfigError("model outputs do not match targets");
  }
}

}  // namespace

double GradVarianceState::variance() const noexcept {
  if (count == 0) return 0.0;
  const double corr = 1.0 - std::pow(decay, static_cast<double>(count));
  if (corr <= 0.0) return 0.0;
  double m2 = 0.0;
  for (double m : mean) m2 += (m / corr) * (m / corr);
  return std::max(0.0, mean_sq_norm / corr - m2);
}

GradVarianceState update_grad_variance_ema(GradVarianceState s, std::span<const double> g) {
  if (s.mean.empty()) s.mean.assign(g.size(), 0.0);
  if (s.mean.size() != g.size()) throw ShapeError("gradient size changed between EMA updates");
  const double a = 1.0 - s.decay;
  double sq = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.mean[i] = s.decay * s.mean[i] + a * g[i];
    sq += g[i] * g[i];
  }
  s.mean_sq_norm = s.decay * s.mean_sq_norm + a * sq;
  ++s.count;
  return s;
}

bool compression_alert(double v, double grad_var, double rho) noexcept {
  return v > rho * std::max(grad_var, kVarianceFloor);
}

StepResult act_step(const ModelGraph& model, const Parameters& params, const Batch& batch,
                    const CompressionScheme& scheme, const KeySet& keys, double lr, double momentum,
                    SgdState& state, BackwardMode mode) {
  for (const Tensor& p : params) p.require_finite("parameters");
  StepResult r;
  r.episode = run_episode(model, params, batch, scheme, keys, mode);
  if (state.velocity.empty() && momentum != 0.0) {
    for (const Tensor& p : params) state.velocity.emplace_back(p.shape(), Precision::dbl);
  }
  r.params = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = r.params[i];
    const Tensor& g = r.episode.grads.tensors[i];
    if (momentum != 0.0) {
      Tensor& v = state.velocity[i];
      for (std::size_t j = 0; j < p.numel(); ++j) {
        v[j] = momentum * v[j] + g[j];
        p[j] -= lr * v[j];
      }
    } else {
      for (std::size_t j = 0; j < p.numel(); ++j) p[j] -= lr * g[j];
    }
    p.apply_precision();
  }
  return r;
}

std::set<SlotId> budget_exclusions(const TrainConfig& c, const ContextPlan& plan) {
  if (!adaptive(c.mode)) return {};
  return pinned_slots(plan, CompressionScheme{}, profile_options(c, 0));
}

CompressionScheme initial_scheme(const TrainConfig& c, const ContextPlan& plan) {
  if (c.mode == TrainMode::fp32) {
    CompressionScheme s;
    s.group_size = c.group_size;
    return s;
  }
  const int b = c.mode == TrainMode::fixed_b ? static_cast<int>(c.avg_bits) : uniform_width(c.avg_bits);
  CompressionScheme s = CompressionScheme::uniform(plan.activation_slots(), b, c.group_size);
  for (SlotId id : budget_exclusions(c, plan)) {
    s.bits_per_slot[id] = kFullPrecisionBits;
    s.forced_fullprec.insert(id);
  }
  return s;
}

double accuracy(const ModelGraph& model, const Parameters& params, const Dataset& data) {
  if (!data.is_classification()) throw InvalidArgument("accuracy needs a classification dataset");
  const Batch b = data.all();
  const ForwardResult f = forward(model, params, b, CompressionScheme{}, KeySet{});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < f.output.rows(); ++i) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < f.output.cols(); ++k) {
      if (f.output.at(i, k) > f.output.at(i, arg)) arg = k;
    }
    correct += static_cast<std::int64_t>(arg) == b.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(b.size());
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  return train(config, make_dataset(config.dataset, config.precision));
}

TrainResult train(const TrainConfig& config, const Dataset& data) {
  config.validate();
  const ModelGraph model = config.model();
  check_data(model, data);
  if (config.batch_size > data.size()) throw ConfigError("batch_size exceeds the dataset size");
  const BackwardMode mode =
      config.mode == TrainMode::checkpointed_adaptive ? BackwardMode::checkpointed : BackwardMode::plain;

  TrainResult r;
  r.config = config;
  r.plan = model.plan(config.batch_size);
  r.params = model.init_params(derive_seed(config.seed, 0), config.precision);
  const std::uint64_t key_seed = derive_seed(config.seed, 1);
  const std::uint64_t batch_seed = derive_seed(config.seed, 2);
  const std::uint64_t profile_seed = derive_seed(config.seed, 3);
  const std::set<SlotId> excluded = budget_exclusions(config, r.plan);

  CompressionScheme scheme = initial_scheme(config, r.plan);
  std::optional<SensitivityProfile> profile;
  GradVarianceState gv;
  gv.decay = config.grad_ema_decay;
  SgdState sgd;

  for (std::int64_t t = 0; t < config.steps; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const Batch batch = data.batch(sample_rows(data.size(), config.batch_size, batch_seed, t));
    const auto step = static_cast<std::uint64_t>(t);
    const KeySet keys{derive_seed(key_seed, step), {}};
    try {
      if (config.mode != TrainMode::fp32 && t > 0 && t % config.adapt_interval == 0) {
        const SensitivityProfile fresh = estimate_sensitivities(
            model, r.params, batch, scheme, derive_seed(profile_seed, step), profile_options(config, t));
        profile = profile ? update_profile(*profile, fresh) : fresh;
        if (adaptive(config.mode)) {
          AllocationProblem p;
          p.c = profile->c;
          p.dims = r.plan.activation_dims();
          p.forced = excluded;
          p.group_size = config.group_size;
          p.budget_bits = budget_from_average(config.avg_bits, p.dims, p.forced);
          scheme = allocate_bits(p);
        }
        r.refreshes.push_back({t, *profile, scheme});
      }
      StepResult s = act_step(model, r.params, batch, scheme, keys, config.learning_rate, config.momentum, sgd,
                              mode);
      r.params = std::move(s.params);
      const std::vector<double> g = s.episode.grads.flat();
      gv = update_grad_variance_ema(std::move(gv), g);

      MetricsRecord m;
      m.step = t;
      m.loss = s.episode.loss;
      m.grad_norm = std::sqrt(s.episode.grads.squared_norm());
      m.predicted_variance = profile ? predicted_variance(profile->c, scheme) : 0.0;
      m.ema_grad_variance = gv.variance();
      m.alert = compression_alert(m.predicted_variance, m.ema_grad_variance, config.alert_threshold);
      m.avg_bits_actual = average_free_bits(scheme, r.plan, excluded);
      m.compression_ratio = s.episode.accounting.compression_ratio();
      m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      r.alert_count += m.alert;
      r.metrics.push_back(m);
    } catch (const NumericError& e) {
      throw DivergenceError("diverged at step " + std::to_string(t) + ": " + e.what());
    }
    if (!config.output_dir.empty() && config.checkpoint_every > 0 && (t + 1) % config.checkpoint_every == 0) {
      std::ostringstream name;
      name << "step_" << (t + 1);
      save_checkpoint(config.output_dir / "checkpoints" / name.str(), model, r.params, t + 1);
    }
  }
  r.final_scheme = scheme;
  try {
    r.final_loss = forward(model, r.params, data.all(), CompressionScheme{}, KeySet{}).loss;
  } catch (const NumericError& e) {
    throw DivergenceError(std::string("final evaluation: ") + e.what());
  }
  if (data.is_classification()) r.final_accuracy = accuracy(model, r.params, data);
  if (!config.output_dir.empty()) save_checkpoint(config.output_dir / "checkpoint", model, r.params, config.steps);
  return r;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& metrics) {
  out << "step,loss,grad_norm,predicted_variance,ema_grad_variance,alert,avg_bits_actual,compression_ratio,wall_ms\n";
  out.precision(17);
  for (const MetricsRecord& m : metrics) {
    out << m.step << ',' << m.loss << ',' << m.grad_norm << ',' << m.predicted_variance << ','
        << m.ema_grad_variance << ',' << (m.alert ? 1 : 0) << ',' << m.avg_bits_actual << ','
        << m.compression_ratio << ',' << m.wall_ms << '\n';
  }
}

void write_sensitivity_evolution_csv(std::ostream& out, const TrainResult& r) {
  out << "refresh_step,slot_id,node_kind,D_l,c_l,bits\n";
  out.precision(17);
  for (const RefreshRecord& rec : r.refreshes) {
    for (const auto& [slot, c] : rec.profile.c) {
      const SlotInfo& info = r.plan.slot(slot);
      out << rec.step << ',' << slot << ',' << to_string(info.node_kind) << ',' << info.dims << ',';
      if (std::isinf(c)) {
        out << "inf";
      } else {
        out << c;
      }
      out << ',' << rec.scheme.bits_for(slot) << '\n';
    }
  }
}

std::string summary_json_text(const TrainResult& r) {
  using detail::json;
  json doc;
  doc["mode"] = std::string(to_string(r.config.mode));
  doc["steps"] = r.config.steps;
  doc["seed"] = r.config.seed;
  doc["final_loss"] = r.final_loss;
  doc["final_accuracy"] = r.final_accuracy ? json(*r.final_accuracy) : json(nullptr);
  const std::set<SlotId> excluded = budget_exclusions(r.config, r.plan);
  doc["avg_bits"] = average_free_bits(r.final_scheme, r.plan, excluded);
  doc["compression_ratio"] = r.metrics.empty() ? 1.0 : r.metrics.back().compression_ratio;
  doc["alert_count"] = r.alert_count;
  doc["refreshes"] = r.refreshes.size();
  json bits = json::object();
  for (SlotId id : r.plan.activation_slots()) bits[r.plan.slot(id).label] = r.final_scheme.bits_for(id);
  doc["bits_per_slot"] = std::move(bits);
  return doc.dump(2);
}

}  // namespace actc
