#include "actc/theorycheck.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "actc/error.hpp"
#include "actc/parallel.hpp"
#include "actc/sensitivity.hpp"

namespace actc {

namespace {

constexpr double kTiny = 1e-300;

void require_verifiable(const ModelGraph& model, const Parameters& params, const Batch& batch) {
  if (!model.is_smooth()) {
    throw InvalidArgument("theory checks need a smooth model (relu and maxpool have no second derivative)");
  }
  if (batch.inputs.precision() != Precision::dbl) throw InvalidArgument("theory checks run in double precision");
  for (const Tensor& p : params) {
    if (p.precision() != Precision::dbl) throw InvalidArgument("theory checks run in double precision");
  }
}

double norm(const std::vector<double>& v) { return std::sqrt(squared_norm(v)); }

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Σ over coordinates of the population variance of `samples`.
double population_variance(const std::vector<const std::vector<double>*>& samples) {
  const std::size_t n = samples.size();
  if (n == 0) return 0.0;
  const std::size_t d = samples.front()->size();
  double total = 0.0;
  // Deviations are taken from the first sample, so identical samples give exactly 0.
  for (std::size_t j = 0; j < d; ++j) {
    const double ref = (*samples.front())[j];
    double sum = 0.0, sq = 0.0;
    for (const auto* s : samples) {
      const double x = (*s)[j] - ref;
      sum += x;
      sq += x * x;
    }
    const double mean = sum / static_cast<double>(n);
    total += std::max(0.0, sq / static_cast<double>(n) - mean * mean);
  }
  return total;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

bool TheoryReport::all_pass() const noexcept {
  return std::all_of(rows.begin(), rows.end(), [](const TheoryRow& r) { return r.pass; });
}

void TheoryReport::append(const TheoryReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  for (const auto& [k, v] : other.metadata) metadata[k] = v;
}

namespace {

// Fields are unquoted, so separators inside text become semicolons.
std::string csv_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  return s;
}

}  // namespace

void TheoryReport::write_csv(std::ostream& out) const {
  out << "experiment,quantity,bits,measured,predicted,ratio,tolerance,verdict\n";
  out.precision(10);
  for (const TheoryRow& r : rows) {
    out << csv_field(r.experiment) << ',' << csv_field(r.quantity) << ',' << r.bits << ',' << r.measured << ','
        << r.predicted << ',' << r.ratio << ',' << csv_field(r.tolerance) << ',' << (r.pass ? "pass" : "fail") << '\n';
  }
}

void TheoryReport::write_summary(std::ostream& out) const {
  for (const TheoryRow& r : rows) {
    out << (r.pass ? "PASS " : "FAIL ") << r.experiment << ' ' << r.quantity;
    if (r.bits != kFullPrecisionBits) out << " b=" << r.bits;
    out << ": " << fmt(r.measured) << " (" << r.tolerance << ")\n";
  }
  for (const auto& [k, v] : metadata) out << "# " << k << ": " << v << '\n';
}

std::vector<double> gradient_on_context(const ModelGraph& model, const ForwardResult& raw,
                                        const std::map<SlotId, Tensor>& context) {
  ContextStore store = raw.store;
  for (const auto& [slot, t] : context) store.overwrite_activation(slot, t);
  return backward(model, raw.plan, store).flat();
}

std::vector<double> linearized_gradient(const ModelGraph& model, const Parameters& params, const Batch& batch,
                                        const CompressionScheme& scheme, const KeySet& keys) {
  require_verifiable(model, params, batch);
  const ForwardResult raw = forward(model, params, batch, CompressionScheme{}, keys);
  const std::vector<double> g = backward(model, raw.plan, raw.store).flat();
  const ForwardResult q = forward(model, params, batch, scheme, keys);

  std::map<SlotId, Tensor> h, dh;
  double h2 = 0.0, dh2 = 0.0;
  for (SlotId id : raw.plan.activation_slots()) {
    Tensor hv = raw.store.load(id);
    Tensor d = q.store.load(id);
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] -= hv[i];
    h2 += squared_norm(hv.data());
    dh2 += squared_norm(d.data());
    h.emplace(id, std::move(hv));
    dh.emplace(id, std::move(d));
  }
  if (dh2 == 0.0) return g;
  const double t = 1e-3 * std::sqrt(h2) / std::max(std::sqrt(dh2), kTiny);
  auto shifted = [&](double sign) {
    std::map<SlotId, Tensor> ctx;
    for (const auto& [id, hv] : h) {
      Tensor v = hv;
      const Tensor& d = dh.at(id);
      for (std::size_t i = 0; i < v.numel(); ++i) v[i] += sign * t * d[i];
      ctx.emplace(id, std::move(v));
    }
    return gradient_on_context(model, raw, ctx);
  };
  const std::vector<double> gp = shifted(1.0), gm = shifted(-1.0);
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] + (gp[i] - gm[i]) / (2.0 * t);
  return out;
}

LinearizationScan linearization_error_scan(const ModelGraph& model, const Parameters& params, const Batch& batch,
                                           const std::vector<int>& ladder, std::size_t n_draws, std::uint64_t seed,
                                           std::size_t group_size) {
  require_verifiable(model, params, batch);
  if (n_draws == 0) throw InvalidArgument("linearization scan needs at least one draw");
  const ContextPlan plan = model.plan(batch.size());
  const ForwardResult raw = forward(model, params, batch, CompressionScheme{}, KeySet{});
  const double g_norm = norm(backward(model, raw.plan, raw.store).flat());

  LinearizationScan scan;
  std::vector<double> xs, ys;
  for (int b : ladder) {
    const CompressionScheme scheme = CompressionScheme::uniform(plan.activation_slots(), b, group_size);
    std::vector<double> err(n_draws), var(n_draws);
    parallel_for(n_draws, [&](std::size_t i) {
      const KeySet keys{derive_seed(seed, static_cast<std::uint64_t>(b) * 1000003ULL + i), {}};
      const ForwardResult q = forward(model, params, batch, scheme, keys);
      const std::vector<double> gq = backward(model, q.plan, q.store).flat();
      err[i] = dist(gq, linearized_gradient(model, params, batch, scheme, keys));
      double v = 0.0;
      for (SlotId id : plan.activation_slots()) {
        const Tensor a = q.store.load(id), h = raw.store.load(id);
        for (std::size_t j = 0; j < a.numel(); ++j) v += (a[j] - h[j]) * (a[j] - h[j]);
      }
      var[i] = v;
    });
    ScanRow row;
    row.bits = b;
    for (std::size_t i = 0; i < n_draws; ++i) {
      row.mean_error += err[i] / static_cast<double>(n_draws);
      row.var_dh += var[i] / static_cast<double>(n_draws);
    }
    row.relative_error = g_norm > 0.0 ? row.mean_error / g_norm : 0.0;
    scan.rows.push_back(row);
    if (b != kFullPrecisionBits && row.mean_error > 0.0 && row.var_dh > 0.0) {
      xs.push_back(std::log(row.var_dh));
      ys.push_back(std::log(row.mean_error));
    }
  }
  if (xs.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    scan.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  return scan;
}

Decomposition variance_decomposition(const ModelGraph& model, const Parameters& params, const Dataset& data,
                                     const CompressionScheme& scheme, std::size_t batch_size, std::size_t n_data,
                                     std::size_t n_keys, std::uint64_t seed) {
  if (n_data < 2 || n_keys < 2) throw InvalidArgument("decomposition needs at least 2 data and 2 keys");
  if (data.size() < batch_size || batch_size == 0) throw InvalidArgument("dataset has fewer rows than batch_size");
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < n_data; ++i) {
    std::vector<std::size_t> rows = sample_rows(data.size(), batch_size, seed, i);
    std::sort(rows.begin(), rows.end());
    batches.push_back(data.batch(rows));
  }
  require_verifiable(model, params, batches.front());

  std::vector<std::vector<double>> clean(n_data);
  std::vector<std::vector<double>> grid(n_data * n_keys);
  const std::uint64_t key_seed = derive_seed(seed, 0xC0FFEE);
  parallel_for(n_data * (n_keys + 1), [&](std::size_t task) {
    const std::size_t i = task / (n_keys + 1), k = task % (n_keys + 1);
    if (k == n_keys) {
      clean[i] = run_episode(model, params, batches[i], CompressionScheme{}, KeySet{}).grads.flat();
    } else {
      const KeySet keys{derive_seed(key_seed, task), {}};
      grid[i * n_keys + k] = run_episode(model, params, batches[i], scheme, keys).grads.flat();
    }
  });

  Decomposition d;
  std::vector<const std::vector<double>*> all, per;
  for (const auto& g : grid) all.push_back(&g);
  d.total = population_variance(all);
  std::vector<const std::vector<double>*> cl;
  for (const auto& g : clean) cl.push_back(&g);
  d.sampling = population_variance(cl);
  for (std::size_t i = 0; i < n_data; ++i) {
    per.clear();
    for (std::size_t k = 0; k < n_keys; ++k) per.push_back(&grid[i * n_keys + k]);
    d.compression += population_variance(per) / static_cast<double>(n_data);
  }
  d.residual = d.total > 0.0 ? std::abs(d.total - d.sampling - d.compression) / d.total : 0.0;
  return d;
}

Additivity additivity_check(const ModelGraph& model, const Parameters& params, const Batch& batch,
                            const CompressionScheme& scheme, std::size_t n_keys, std::uint64_t seed) {
  require_verifiable(model, params, batch);
  if (n_keys < 2) throw InvalidArgument("additivity check needs at least 2 keys");
  const ContextPlan plan = model.plan(batch.size());
  Additivity a;
  a.v_all = gradient_variance(model, params, batch, scheme, n_keys, [&](std::size_t i) {
    return KeySet{derive_seed(seed, i), {}};
  });
  // Each single-slot run reuses the keys of the joint run (common random
  // numbers), so slot l sees the same rounding noise in both.
  std::uint64_t sub = 1;
  for (SlotId id : plan.activation_slots()) {
    const int b = scheme.bits_for(id);
    ++sub;
    if (b == kFullPrecisionBits) {
      a.v_slot[id] = 0.0;
      continue;
    }
    CompressionScheme only;
    only.group_size = scheme.group_size;
    only.bits_per_slot[id] = b;
    a.v_slot[id] = gradient_variance(model, params, batch, only, n_keys, [&](std::size_t i) {
      return KeySet{derive_seed(seed, i), {}};
    });
    a.v_sum += a.v_slot[id];
    const double c = brute_force_sensitivity(model, params, batch, scheme, id, b, std::max<std::size_t>(n_keys, 100),
                                             derive_seed(seed, 0x200000 * sub));
    a.predicted += c * bit_factor(b);
  }
  a.residual = a.v_all > 0.0 ? std::abs(a.v_all - a.v_sum) / a.v_all : 0.0;
  return a;
}

ModelGraph reference_tanh_mlp() {
  return ModelGraph::from_json_text(R"({"input_dim": 8, "nodes": [
    {"kind": "linear", "out": 32}, {"kind": "tanh"},
    {"kind": "linear", "out": 32}, {"kind": "tanh"},
    {"kind": "linear", "out": 4}, {"kind": "softmax_ce"}]})");
}

ModelGraph three_slot_mlp() {
  return ModelGraph::from_json_text(R"({"input_dim": 8, "nodes": [
    {"kind": "linear", "out": 32}, {"kind": "tanh", "saves": "output"},
    {"kind": "linear", "out": 4}, {"kind": "softmax_ce"}]})");
}

Dataset reference_blobs(std::size_t samples, std::uint64_t seed, Precision precision) {
  return gaussian_blobs(samples, 8, 4, 3.0, seed, precision);
}

}  // namespace actc
