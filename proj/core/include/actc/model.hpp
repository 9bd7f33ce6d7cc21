#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "actc/scheme.hpp"
#include "actc/tensor.hpp"

namespace actc {

enum class NodeKind { linear, relu, tanh, dropout, maxpool2d, softmax_ce, mse };
enum class LossKind { softmax_ce, mse };

/// What a context slot holds. Only activation slots are ever quantized.
enum class SlotKind { activation, parameter, state };

[[nodiscard]] std::string_view to_string(NodeKind kind) noexcept;
[[nodiscard]] std::string_view to_string(SlotKind kind) noexcept;
[[nodiscard]] NodeKind parse_node_kind(std::string_view name);

/// Per-sample image layout of a max-pool input row: channels × height × width.
struct PoolGeometry {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel = 2;
  std::size_t stride = 2;

  [[nodiscard]] std::size_t out_height() const noexcept { return (height - kernel) / stride + 1; }
  [[nodiscard]] std::size_t out_width() const noexcept { return (width - kernel) / stride + 1; }
};

struct NodeSpec {
  NodeKind kind = NodeKind::linear;
  std::size_t out_features = 0;  // linear
  double keep_prob = 1.0;        // dropout
  PoolGeometry pool;             // maxpool2d
  bool saves_output = false;     // tanh: save y instead of the pre-activation
  bool segment_start = false;    // checkpointing boundary before this node
};

struct Node {
  NodeSpec spec;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::optional<std::size_t> weight;  // parameter index, W is [in × out]
  std::optional<std::size_t> bias;
};

struct ParamInfo {
  std::string name;
  Shape shape;
  std::size_t node = 0;
};

using Parameters = std::vector<Tensor>;

/// Identity of a tensor inside one forward pass; equal tokens are the same tensor.
struct ValueToken {
  enum class Kind { value, param, state } kind = Kind::value;
  std::size_t index = 0;  // value: input of node `index`; param: parameter index; state: node
  std::size_t sub = 0;    // state: which saved item of the node

  auto operator<=>(const ValueToken&) const = default;
};

struct SlotInfo {
  SlotId id = 0;
  SlotKind kind = SlotKind::activation;
  ValueToken token;
  Shape shape;
  std::size_t dims = 0;
  std::size_t node = 0;  // first node that captures the slot
  NodeKind node_kind = NodeKind::linear;
  std::string label;
};

struct SegmentRange {
  std::size_t begin = 0;  // first node
  std::size_t end = 0;    // one past the last node
  SlotId input_slot = 0;
};

/// Static map from (node, saved item) to deduplicated context slots.
struct ContextPlan {
  std::size_t batch_size = 0;
  std::vector<SlotInfo> slots;
  std::vector<std::vector<SlotId>> node_slots;
  std::vector<SegmentRange> segments;  // empty unless the model declares boundaries

  [[nodiscard]] const SlotInfo& slot(SlotId id) const;
  [[nodiscard]] std::vector<SlotId> activation_slots() const;
  [[nodiscard]] std::map<SlotId, std::size_t> activation_dims() const;
  /// Σ D_l over activation slots.
  [[nodiscard]] std::size_t context_dims() const;
  /// Activation slot(s) captured by the loss node.
  [[nodiscard]] std::vector<SlotId> loss_head_slots() const;
};

/// Feed-forward operator chain ending in exactly one loss node.
class ModelGraph {
 public:
  ModelGraph(std::size_t input_dim, std::vector<NodeSpec> specs);

  /// {"input_dim": F, "nodes": [{"kind": "linear", "out": 16}, ...]}; unknown keys are rejected.
  static ModelGraph from_json_text(std::string_view text);
  static ModelGraph load(const std::filesystem::path& path);
  [[nodiscard]] std::string to_json_text() const;

  [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
  /// Feature count entering the loss node.
  [[nodiscard]] std::size_t output_dim() const noexcept { return nodes_.back().in_features; }
  [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<ParamInfo>& params() const noexcept { return params_; }
  [[nodiscard]] LossKind loss_kind() const noexcept { return loss_kind_; }
  [[nodiscard]] bool has_segments() const noexcept;
  [[nodiscard]] bool is_smooth() const noexcept;

  [[nodiscard]] ContextPlan plan(std::size_t batch_size) const;

  /// Glorot-uniform weights and zero biases, drawn from counter streams of `seed`.
  [[nodiscard]] Parameters init_params(std::uint64_t seed,
                                       Precision precision = Precision::single) const;
  /// Throws ShapeError unless `params` matches the declared parameter shapes.
  void check_params(const Parameters& params) const;

 private:
  std::size_t input_dim_;
  std::vector<Node> nodes_;
  std::vector<ParamInfo> params_;
  LossKind loss_kind_ = LossKind::softmax_ce;
};

}  // namespace actc
