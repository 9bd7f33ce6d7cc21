#include "actc/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "actc/error.hpp"
#include "actc/rng.hpp"
#include "json_util.hpp"

namespace actc {

namespace {

constexpr std::uint64_t kParamStreamBase = 0x5000'0000ULL;

bool captures_input(const NodeSpec& s) noexcept {
  switch (s.kind) {
    case NodeKind::linear:
    case NodeKind::relu:
      return true;
    case NodeKind::tanh:
      return !s.saves_output;
    default:
      return false;
  }
}

bool is_loss(NodeKind k) noexcept { return k == NodeKind::softmax_ce || k == NodeKind::mse; }

}  // namespace

std::string_view to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::linear: return "linear";
    case NodeKind::relu: return "relu";
    case NodeKind::tanh: return "tanh";
    case NodeKind::dropout: return "dropout";
    case NodeKind::maxpool2d: return "maxpool2d";
    case NodeKind::softmax_ce: return "softmax_ce";
    case NodeKind::mse: return "mse";
  }
  return "?";
}

std::string_view to_string(SlotKind kind) noexcept {
  switch (kind) {
    case SlotKind::activation: return "activation";
    case SlotKind::parameter: return "parameter";
    case SlotKind::state: return "integer-state";
  }
  return "?";
}

NodeKind parse_node_kind(std::string_view name) {
  for (NodeKind k : {NodeKind::linear, NodeKind::relu, NodeKind::tanh, NodeKind::dropout,
                     NodeKind::maxpool2d, NodeKind::softmax_ce, NodeKind::mse}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown node kind '" + std::string(name) + "'");
}

const SlotInfo& ContextPlan::slot(SlotId id) const {
  if (id >= slots.size()) throw ContextError("no slot " + std::to_string(id) + " in plan");
  return slots[id];
}

std::vector<SlotId> ContextPlan::activation_slots() const {
  std::vector<SlotId> out;
  for (const auto& s : slots) {
    if (s.kind == SlotKind::activation) out.push_back(s.id);
  }
  return out;
}

std::map<SlotId, std::size_t> ContextPlan::activation_dims() const {
  std::map<SlotId, std::size_t> out;
  for (const auto& s : slots) {
    if (s.kind == SlotKind::activation) out[s.id] = s.dims;
  }
  return out;
}

std::size_t ContextPlan::context_dims() const {
  std::size_t total = 0;
  for (const auto& s : slots) {
    if (s.kind == SlotKind::activation) total += s.dims;
  }
  return total;
}

std::vector<SlotId> ContextPlan::loss_head_slots() const {
  std::vector<SlotId> out;
  if (node_slots.empty()) return out;
  for (SlotId id : node_slots.back()) {
    if (slots[id].kind == SlotKind::activation) out.push_back(id);
  }
  return out;
}

ModelGraph::ModelGraph(std::size_t input_dim, std::vector<NodeSpec> specs) : input_dim_(input_dim) {
  if (input_dim == 0) throw ShapeError("model input dimension must be positive");
  if (specs.empty()) throw ConfigError("model has no nodes");
  std::size_t features = input_dim;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const NodeSpec& s = specs[k];
    Node node;
    node.spec = s;
    node.in_features = features;
    const bool last = k + 1 == specs.size();
    if (is_loss(s.kind) != last) {
      throw ConfigError("the loss must be the single terminal node (node " + std::to_string(k) +
                        " is " + std::string(to_string(s.kind)) + ")");
    }
    if (s.saves_output && s.kind != NodeKind::tanh) {
      throw ConfigError("only tanh nodes may save their output");
    }
    switch (s.kind) {
      case NodeKind::linear: {
        if (s.out_features == 0) throw ConfigError("linear node needs a positive 'out'");
        node.out_features = s.out_features;
        node.weight = params_.size();
        params_.push_back({"linear" + std::to_string(k) + ".weight", {features, s.out_features}, k});
        node.bias = params_.size();
        params_.push_back({"linear" + std::to_string(k) + ".bias", {s.out_features}, k});
        break;
      }
      case NodeKind::relu:
      case NodeKind::tanh:
        node.out_features = features;
        break;
      case NodeKind::dropout:
        if (!(s.keep_prob > 0.0 && s.keep_prob <= 1.0)) {
          throw ConfigError("dropout keep_prob must lie in (0, 1]");
        }
        node.out_features = features;
        break;
      case NodeKind::maxpool2d: {
        const PoolGeometry& g = s.pool;
        if (g.channels * g.height * g.width != features) {
          throw ShapeError("maxpool2d geometry " + std::to_string(g.channels) + "x" +
                           std::to_string(g.height) + "x" + std::to_string(g.width) +
                           " does not match " + std::to_string(features) + " input features");
        }
        if (g.kernel == 0 || g.stride == 0 || g.kernel > g.height || g.kernel > g.width) {
          throw ConfigError("maxpool2d kernel/stride out of range");
        }
        node.out_features = g.channels * g.out_height() * g.out_width();
        break;
      }
      case NodeKind::softmax_ce:
        if (features < 2) throw ConfigError("softmax_ce needs at least two classes");
        node.out_features = 1;
        loss_kind_ = LossKind::softmax_ce;
        break;
      case NodeKind::mse:
        node.out_features = 1;
        loss_kind_ = LossKind::mse;
        break;
    }
    if (s.segment_start && (!captures_input(s) || k + 1 == specs.size())) {
      throw ConfigError("segment boundary at node " + std::to_string(k) +
                        " must sit on a linear, relu, or input-saving tanh node");
    }
    features = node.out_features;
    nodes_.push_back(std::move(node));
  }
  if (has_segments() && !captures_input(nodes_.front().spec)) {
    throw ConfigError("a checkpointed model must start with a node that captures its input");
  }
}

bool ModelGraph::has_segments() const noexcept {
  return std::any_of(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.spec.segment_start; });
}

bool ModelGraph::is_smooth() const noexcept {
  return std::none_of(nodes_.begin(), nodes_.end(), [](const Node& n) {
    return n.spec.kind == NodeKind::relu || n.spec.kind == NodeKind::maxpool2d;
  });
}

ContextPlan ModelGraph::plan(std::size_t batch_size) const {
  if (batch_size == 0) throw ShapeError("batch size must be positive");
  ContextPlan plan;
  plan.batch_size = batch_size;
  plan.node_slots.resize(nodes_.size());
  std::map<ValueToken, SlotId> by_token;

  auto capture = [&](std::size_t k, SlotKind kind, ValueToken token, Shape shape, std::string label) {
    auto [it, inserted] = by_token.try_emplace(token, plan.slots.size());
    if (inserted) {
      SlotInfo info;
      info.id = plan.slots.size();
      info.kind = kind;
      info.token = token;
      info.dims = shape_numel(shape);
      info.shape = std::move(shape);
      info.node = k;
      info.node_kind = nodes_[k].spec.kind;
      info.label = std::move(label);
      plan.slots.push_back(std::move(info));
    }
    plan.node_slots[k].push_back(it->second);
  };
  using TK = ValueToken::Kind;
  const std::size_t n = batch_size;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& node = nodes_[k];
    const std::string tag = std::string(to_string(node.spec.kind)) + std::to_string(k);
    switch (node.spec.kind) {
      case NodeKind::linear:
        capture(k, SlotKind::activation, {TK::value, k, 0}, {n, node.in_features}, tag + ".input");
        capture(k, SlotKind::parameter, {TK::param, *node.weight, 0}, params_[*node.weight].shape,
                tag + ".weight");
        break;
      case NodeKind::relu:
        capture(k, SlotKind::activation, {TK::value, k, 0}, {n, node.in_features}, tag + ".input");
        break;
      case NodeKind::tanh:
        if (node.spec.saves_output) {
          capture(k, SlotKind::activation, {TK::value, k + 1, 0}, {n, node.out_features},
                  tag + ".output");
        } else {
          capture(k, SlotKind::activation, {TK::value, k, 0}, {n, node.in_features}, tag + ".input");
        }
        break;
      case NodeKind::dropout:
        capture(k, SlotKind::state, {TK::state, k, 0}, {n, node.in_features}, tag + ".mask");
        break;
      case NodeKind::maxpool2d:
        capture(k, SlotKind::state, {TK::state, k, 0}, {n, node.out_features}, tag + ".indices");
        break;
      case NodeKind::softmax_ce:
        capture(k, SlotKind::activation, {TK::state, k, 0}, {n, node.in_features}, tag + ".probs");
        capture(k, SlotKind::state, {TK::state, k, 1}, {n}, tag + ".labels");
        break;
      case NodeKind::mse:
        capture(k, SlotKind::activation, {TK::value, k, 0}, {n, node.in_features}, tag + ".input");
        capture(k, SlotKind::state, {TK::state, k, 1}, {n, node.in_features}, tag + ".targets");
        break;
    }
  }
  if (has_segments()) {
    std::vector<std::size_t> starts{0};
    for (std::size_t k = 1; k < nodes_.size(); ++k) {
      if (nodes_[k].spec.segment_start) starts.push_back(k);
    }
    for (std::size_t i = 0; i < starts.size(); ++i) {
      SegmentRange seg;
      seg.begin = starts[i];
      seg.end = i + 1 < starts.size() ? starts[i + 1] : nodes_.size();
      seg.input_slot = by_token.at({TK::value, seg.begin, 0});
      plan.segments.push_back(seg);
    }
  }
  return plan;
}

Parameters ModelGraph::init_params(std::uint64_t seed, Precision precision) const {
  Parameters params;
  params.reserve(params_.size());
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor t(params_[p].shape, precision);
    if (params_[p].shape.size() == 2) {
      const double fan = static_cast<double>(params_[p].shape[0] + params_[p].shape[1]);
      const double a = std::sqrt(6.0 / fan);
      const StreamKey key{seed, kParamStreamBase + p};
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] = a * (2.0 * counter_rng(key, i) - 1.0);
      t.apply_precision();
    }
    params.push_back(std::move(t));
  }
  return params;
}

void ModelGraph::check_params(const Parameters& params) const {
  if (params.size() != params_.size()) {
    throw ShapeError("model declares " + std::to_string(params_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].shape() != params_[p].shape) {
      throw ShapeError(params_[p].name + " expects " + shape_to_string(params_[p].shape) +
                       ", got " + shape_to_string(params[p].shape()));
    }
  }
}

ModelGraph ModelGraph::from_json_text(std::string_view text) {
  using detail::json;
  const json doc = detail::parse_json(text, "model description");
  detail::require_known_keys(doc, {"input_dim", "nodes"}, "model");
  const auto input_dim = detail::get_required<std::size_t>(doc, "input_dim", "model");
  const auto it = doc.find("nodes");
  if (it == doc.end() || !it->is_array()) throw ConfigError("model.nodes must be an array");
  std::vector<NodeSpec> specs;
  for (std::size_t k = 0; k < it->size(); ++k) {
    const json& nj = (*it)[k];
    const std::string where = "model.nodes[" + std::to_string(k) + "]";
    NodeSpec s;
    s.kind = parse_node_kind(detail::get_required<std::string>(nj, "kind", where));
    switch (s.kind) {
      case NodeKind::linear:
        detail::require_known_keys(nj, {"kind", "out", "segment"}, where);
        s.out_features = detail::get_required<std::size_t>(nj, "out", where);
        break;
      case NodeKind::tanh: {
        detail::require_known_keys(nj, {"kind", "saves", "segment"}, where);
        const auto saves = detail::get_or<std::string>(nj, "saves", "input", where);
        if (saves != "input" && saves != "output") {
          throw ConfigError(where + ".saves must be 'input' or 'output'");
        }
        s.saves_output = saves == "output";
        break;
      }
      case NodeKind::dropout:
        detail::require_known_keys(nj, {"kind", "keep_prob", "segment"}, where);
        s.keep_prob = detail::get_required<double>(nj, "keep_prob", where);
        break;
      case NodeKind::maxpool2d:
        detail::require_known_keys(nj, {"kind", "channels", "height", "width", "kernel", "stride", "segment"},
                                   where);
        s.pool.channels = detail::get_or<std::size_t>(nj, "channels", 1, where);
        s.pool.height = detail::get_required<std::size_t>(nj, "height", where);
        s.pool.width = detail::get_required<std::size_t>(nj, "width", where);
        s.pool.kernel = detail::get_or<std::size_t>(nj, "kernel", 2, where);
        s.pool.stride = detail::get_or<std::size_t>(nj, "stride", s.pool.kernel, where);
        break;
      default:
        detail::require_known_keys(nj, {"kind", "segment"}, where);
        break;
    }
    s.segment_start = detail::get_or<bool>(nj, "segment", false, where);
    specs.push_back(s);
  }
  return ModelGraph(input_dim, std::move(specs));
}

ModelGraph ModelGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model description " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ModelGraph::to_json_text() const {
  using detail::json;
  json doc;
  doc["input_dim"] = input_dim_;
  json nodes = json::array();
  for (const Node& n : nodes_) {
    json nj;
    nj["kind"] = std::string(to_string(n.spec.kind));
    switch (n.spec.kind) {
      case NodeKind::linear: nj["out"] = n.spec.out_features; break;
      case NodeKind::tanh:
        if (n.spec.saves_output) nj["saves"] = "output";
        break;
      case NodeKind::dropout: nj["keep_prob"] = n.spec.keep_prob; break;
      case NodeKind::maxpool2d:
        nj["channels"] = n.spec.pool.channels;
        nj["height"] = n.spec.pool.height;
        nj["width"] = n.spec.pool.width;
        nj["kernel"] = n.spec.pool.kernel;
        nj["stride"] = n.spec.pool.stride;
        break;
      default: break;
    }
    if (n.spec.segment_start) nj["segment"] = true;
    nodes.push_back(std::move(nj));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2);
}

}  // namespace actc
