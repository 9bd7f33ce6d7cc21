#include "actc/train_config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "actc/error.hpp"
#include "actc/quantizer.hpp"
#include "json_util.hpp"

namespace actc {

namespace {

using detail::json;

const std::initializer_list<std::string_view> kTopKeys = {
    "mode", "learning_rate", "momentum", "steps", "batch_size", "avg_bits", "adapt_interval",
    "alert_threshold", "seed", "grad_ema_decay", "sensitivity_ema_decay", "n_pairs", "pin_loss_head",
    "min_slot_dims", "group_size", "checkpoint_every", "precision", "output_dir", "dataset", "model"};

const std::initializer_list<std::string_view> kDatasetKeys = {
    "kind", "samples", "features", "classes", "separation", "noise", "teacher_hidden", "outputs",
    "seed", "images", "labels", "limit"};

void apply_override(json& doc, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not key=value");
  const std::string path = item.substr(0, eq), text = item.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override key '" + path + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override '" + path + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

template <typename T>
T unsigned_field(const json& obj, const char* key, T fallback, std::string_view where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
    throw ConfigError(std::string(where) + "." + key + " must be a nonnegative integer");
  }
  return it->get<T>();
}

std::string read_text(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(TrainMode mode) noexcept {
  switch (mode) {
    case TrainMode::fp32: return "fp32";
    case TrainMode::fixed_b: return "fixed_b";
    case TrainMode::adaptive_b: return "adaptive_b";
    case TrainMode::checkpointed_adaptive: return "checkpointed_adaptive";
  }
  return "unknown";
}

TrainMode parse_train_mode(std::string_view name) {
  for (TrainMode m : {TrainMode::fp32, TrainMode::fixed_b, TrainMode::adaptive_b,
                      TrainMode::checkpointed_adaptive}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

ModelGraph TrainConfig::model() const {
  if (model_json.empty()) throw ConfigError("configuration has no model");
  return ModelGraph::from_json_text(model_json);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (steps < 1) throw ConfigError("steps must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (adapt_interval < 1) throw ConfigError("adapt_interval must be at least 1");
  if (!(alert_threshold > 0.0 && alert_threshold <= 1.0)) throw ConfigError("alert_threshold must lie in (0, 1]");
  if (!(grad_ema_decay >= 0.0 && grad_ema_decay < 1.0)) throw ConfigError("grad_ema_decay must lie in [0, 1)");
  if (!(sensitivity_ema_decay >= 0.0 && sensitivity_ema_decay < 1.0)) {
    throw ConfigError("sensitivity_ema_decay must lie in [0, 1)");
  }
  if (n_pairs < 1) throw ConfigError("n_pairs must be at least 1");
  if (group_size < 2) throw ConfigError("group_size must be at least 2");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be nonnegative");
  const double lo = kBitLadder.front(), hi = kBitLadder.back();
  if (mode == TrainMode::fixed_b) {
    const int b = static_cast<int>(avg_bits);
    if (static_cast<double>(b) != avg_bits || !is_codec_width(b) || b == kFullPrecisionBits) {
      throw ConfigError("fixed_b needs an integer avg_bits between 1 and 16");
    }
  } else if (mode != TrainMode::fp32 && !(avg_bits >= lo && avg_bits <= hi)) {
    throw ConfigError("avg_bits must lie in [" + std::to_string(kBitLadder.front()) + ", " +
                      std::to_string(kBitLadder.back()) + "]");
  }
  if (dataset.kind != "idx" && batch_size > dataset.samples) {
    throw ConfigError("batch_size exceeds dataset.samples");
  }
  const ModelGraph m = model();
  if (mode == TrainMode::checkpointed_adaptive && !m.has_segments()) {
    throw ConfigError("checkpointed_adaptive needs a model with segment boundaries");
  }
}

TrainConfig parse_train_config(std::string_view text, const std::vector<std::string>& overrides,
                               const std::filesystem::path& base_dir) {
  json doc = detail::parse_json(text, "configuration");
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& o : overrides) apply_override(doc, o);
  detail::require_known_keys(doc, kTopKeys, "configuration");
  const char* w = "configuration";

  TrainConfig c;
  c.mode = parse_train_mode(detail::get_or<std::string>(doc, "mode", std::string(to_string(c.mode)), w));
  c.learning_rate = detail::get_or<double>(doc, "learning_rate", c.learning_rate, w);
  c.momentum = detail::get_or<double>(doc, "momentum", c.momentum, w);
  c.steps = unsigned_field<std::int64_t>(doc, "steps", c.steps, w);
  c.batch_size = unsigned_field<std::size_t>(doc, "batch_size", c.batch_size, w);
  c.avg_bits = detail::get_or<double>(doc, "avg_bits", c.avg_bits, w);
  c.adapt_interval = unsigned_field<std::int64_t>(doc, "adapt_interval", c.adapt_interval, w);
  c.alert_threshold = detail::get_or<double>(doc, "alert_threshold", c.alert_threshold, w);
  c.seed = unsigned_field<std::uint64_t>(doc, "seed", c.seed, w);
  c.grad_ema_decay = detail::get_or<double>(doc, "grad_ema_decay", c.grad_ema_decay, w);
  c.sensitivity_ema_decay = detail::get_or<double>(doc, "sensitivity_ema_decay", c.sensitivity_ema_decay, w);
  c.n_pairs = unsigned_field<std::size_t>(doc, "n_pairs", c.n_pairs, w);
  c.pin_loss_head = detail::get_or<bool>(doc, "pin_loss_head", c.pin_loss_head, w);
  c.min_slot_dims = unsigned_field<std::size_t>(doc, "min_slot_dims", c.min_slot_dims, w);
  c.group_size = unsigned_field<std::size_t>(doc, "group_size", c.group_size, w);
  c.checkpoint_every = unsigned_field<std::int64_t>(doc, "checkpoint_every", c.checkpoint_every, w);
  const auto precision = detail::get_or<std::string>(doc, "precision", "single", w);
  if (precision == "single") {
    c.precision = Precision::single;
  } else if (precision == "double") {
    c.precision = Precision::dbl;
  } else {
    throw ConfigError("precision must be 'single' or 'double'");
  }
  c.output_dir = detail::get_or<std::string>(doc, "output_dir", "", w);

  if (const auto it = doc.find("dataset"); it != doc.end()) {
    const json& d = *it;
    const char* dw = "configuration.dataset";
    detail::require_known_keys(d, kDatasetKeys, dw);
    DatasetSpec& s = c.dataset;
    s.kind = detail::get_or<std::string>(d, "kind", s.kind, dw);
    s.samples = unsigned_field<std::size_t>(d, "samples", s.samples, dw);
    s.features = unsigned_field<std::size_t>(d, "features", s.features, dw);
    s.classes = unsigned_field<std::size_t>(d, "classes", s.classes, dw);
    s.separation = detail::get_or<double>(d, "separation", s.separation, dw);
    s.noise = detail::get_or<double>(d, "noise", s.noise, dw);
    s.teacher_hidden = unsigned_field<std::size_t>(d, "teacher_hidden", s.teacher_hidden, dw);
    s.outputs = unsigned_field<std::size_t>(d, "outputs", s.outputs, dw);
    s.seed = unsigned_field<std::uint64_t>(d, "seed", s.seed, dw);
    s.limit = unsigned_field<std::size_t>(d, "limit", s.limit, dw);
    auto resolve = [&](const char* key) -> std::filesystem::path {
      const std::filesystem::path p = detail::get_or<std::string>(d, key, "", dw);
      return p.empty() || p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    };
    s.images = resolve("images");
    s.labels = resolve("labels");
  }

  const auto mit = doc.find("model");
  if (mit == doc.end()) throw ConfigError("configuration is missing 'model'");
  if (mit->is_string()) {
    std::filesystem::path p = mit->get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.model_json = read_text(p, "model description");
  } else if (mit->is_object()) {
    c.model_json = mit->dump();
  } else {
    throw ConfigError("model must be an object or a path");
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  return parse_train_config(read_text(path, "config file"), overrides, path.parent_path());
}

std::string to_json_text(const TrainConfig& c) {
  json doc;
  doc["mode"] = std::string(to_string(c.mode));
  doc["learning_rate"] = c.learning_rate;
  doc["momentum"] = c.momentum;
  doc["steps"] = c.steps;
  doc["batch_size"] = c.batch_size;
  doc["avg_bits"] = c.avg_bits;
  doc["adapt_interval"] = c.adapt_interval;
  doc["alert_threshold"] = c.alert_threshold;
  doc["seed"] = c.seed;
  doc["grad_ema_decay"] = c.grad_ema_decay;
  doc["sensitivity_ema_decay"] = c.sensitivity_ema_decay;
  doc["n_pairs"] = c.n_pairs;
  doc["pin_loss_head"] = c.pin_loss_head;
  doc["min_slot_dims"] = c.min_slot_dims;
  doc["group_size"] = c.group_size;
  doc["checkpoint_every"] = c.checkpoint_every;
  doc["precision"] = c.precision == Precision::dbl ? "double" : "single";
  doc["output_dir"] = c.output_dir.string();
  const DatasetSpec& s = c.dataset;
  json d{{"kind", s.kind},       {"samples", s.samples},
         {"features", s.features}, {"classes", s.classes},
         {"separation", s.separation}, {"noise", s.noise},
         {"teacher_hidden", s.teacher_hidden}, {"outputs", s.outputs},
         {"seed", s.seed},       {"limit", s.limit}};
  if (!s.images.empty()) d["images"] = s.images.string();
  if (!s.labels.empty()) d["labels"] = s.labels.string();
  doc["dataset"] = std::move(d);
  doc["model"] = json::parse(c.model_json);
  return doc.dump(2);
}

}  // namespace actc
