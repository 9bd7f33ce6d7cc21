#include "actc/tape.hpp"

#include <cmath>
#include <optional>

#include "actc/error.hpp"
#include "actc/ops.hpp"

namespace actc {

namespace {

constexpr std::uint64_t kDropoutStreamBase = 0x44000000ULL;

IndexPayload labels_payload(const Batch& batch) { return {batch.labels.begin(), batch.labels.end()}; }

/// Optional sink for saved context: offers the slots of each node it is asked to keep.
struct Capture {
  const ContextPlan& plan;
  const CompressionScheme& scheme;
  const KeySet& keys;
  ContextStore* store = nullptr;

  void tensor(std::size_t k, std::size_t item, const Tensor& value) const {
    if (!store) return;
    const SlotInfo& info = plan.slot(plan.node_slots[k][item]);
    store->offer(info, value, scheme.bits_for(info.id), scheme.group_size, keys.slot_key(info.id));
  }
  void indices(std::size_t k, std::size_t item, IndexPayload v) const {
    if (!store) return;
    store->offer_indices(plan.slot(plan.node_slots[k][item]), std::move(v));
  }
};

struct RunResult {
  Tensor value;  // output of the last node run, or the loss input when the loss is reached
  double loss = 0.0;
};

/// Runs nodes [begin, end) on `x`, the input of node `begin`.
RunResult run_nodes(const ModelGraph& model, const Parameters& params, const Batch& batch,
                    const KeySet& keys, std::size_t begin, std::size_t end, Tensor x,
                    const Capture& cap) {
  const auto& nodes = model.nodes();
  RunResult r;
  for (std::size_t k = begin; k < end; ++k) {
    const Node& node = nodes[k];
    switch (node.spec.kind) {
      case NodeKind::linear: {
        cap.tensor(k, 0, x);
        cap.tensor(k, 1, params[*node.weight]);
        x = linear_forward(x, params[*node.weight], params[*node.bias]);
        break;
      }
      case NodeKind::relu:
        cap.tensor(k, 0, x);
        x = relu_forward(x);
        break;
      case NodeKind::tanh:
        if (node.spec.saves_output) {
          x = tanh_forward(x);
          cap.tensor(k, 0, x);
        } else {
          cap.tensor(k, 0, x);
          x = tanh_forward(x);
        }
        break;
      case NodeKind::dropout: {
        IndexPayload mask = dropout_mask(keys.dropout_key(k), x.numel(), node.spec.keep_prob);
        x = dropout_forward(x, mask, node.spec.keep_prob);
        cap.indices(k, 0, std::move(mask));
        break;
      }
      case NodeKind::maxpool2d: {
        PoolResult p = maxpool2d_forward(x, node.spec.pool);
        x = std::move(p.output);
        cap.indices(k, 0, std::move(p.indices));
        break;
      }
      case NodeKind::softmax_ce: {
        SoftmaxCeResult s = softmax_ce_forward(x, batch.labels);
        cap.tensor(k, 0, s.probs);
        cap.indices(k, 1, labels_payload(batch));
        r.loss = s.loss;
        break;
      }
      case NodeKind::mse:
        r.loss = mse_forward(x, batch.targets);
        cap.tensor(k, 0, x);
        cap.tensor(k, 1, batch.targets);
        break;
    }
    if (node.spec.kind != NodeKind::softmax_ce && node.spec.kind != NodeKind::mse) {
      x.require_finite(("output of node " + std::to_string(k)).c_str());
    }
  }
  if (!std::isfinite(r.loss)) throw NumericError("loss is not finite");
  r.value = std::move(x);
  return r;
}

/// Backpropagates through nodes [begin, end). `upstream` is the gradient
/// w.r.t. the output of node end−1 (ignored when that node is the loss).
/// Returns the gradient w.r.t. the input of node `begin`, unless begin == 0.
std::optional<Tensor> backprop_nodes(const ModelGraph& model, const ContextPlan& plan,
                                     const ContextStore& store, std::size_t begin, std::size_t end,
                                     std::optional<Tensor> upstream, Gradients& grads) {
  const auto& nodes = model.nodes();
  for (std::size_t k = end; k-- > begin;) {
    const Node& node = nodes[k];
    const auto& slots = plan.node_slots[k];
    Tensor up;
    switch (node.spec.kind) {
      case NodeKind::softmax_ce: {
        const IndexPayload& labels = store.indices(slots[1]);
        up = softmax_ce_vjp(store.load(slots[0]), labels);
        break;
      }
      case NodeKind::mse:
        up = mse_vjp(store.load(slots[0]), store.load(slots[1]));
        break;
      case NodeKind::linear: {
        const Tensor* w = store.raw_view(slots[1]);
        if (!w) throw ContextError("linear weight slot is not stored raw");
        LinearGrads g = linear_vjp(store.load(slots[0]), *w, *upstream);
        grads.tensors[*node.weight] = std::move(g.grad_weight);
        grads.tensors[*node.bias] = std::move(g.grad_bias);
        up = std::move(g.grad_input);
        break;
      }
      case NodeKind::relu:
        up = relu_vjp(store.load(slots[0]), *upstream);
        break;
      case NodeKind::tanh:
        up = node.spec.saves_output ? tanh_vjp_from_output(store.load(slots[0]), *upstream)
                                    : tanh_vjp_from_input(store.load(slots[0]), *upstream);
        break;
      case NodeKind::dropout:
        up = dropout_vjp(store.indices(slots[0]), *upstream, node.spec.keep_prob);
        break;
      case NodeKind::maxpool2d:
        up = maxpool2d_vjp(store.indices(slots[0]), *upstream,
                           {upstream->shape()[0], node.in_features});
        break;
    }
    upstream = std::move(up);
  }
  if (begin == 0) return std::nullopt;
  return upstream;
}

Gradients empty_grads(const ModelGraph& model) {
  Gradients g;
  g.tensors.resize(model.params().size());
  return g;
}

void finish(Gradients& g) {
  for (const Tensor& t : g.tensors) {
    if (t.empty()) throw ContextError("a parameter received no gradient");
    t.require_finite("gradient");
  }
}

}  // namespace

StreamKey KeySet::slot_key(SlotId slot) const {
  const auto it = overrides.find(slot);
  return {it == overrides.end() ? seed : it->second, slot};
}

StreamKey KeySet::dropout_key(std::size_t node) const { return {seed, kDropoutStreamBase + node}; }

KeySet KeySet::with_override(SlotId slot, std::uint64_t slot_seed) const {
  KeySet k = *this;
  k.overrides[slot] = slot_seed;
  return k;
}

std::vector<double> Gradients::flat() const {
  std::vector<double> out;
  out.reserve(numel());
  for (const Tensor& t : tensors) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const Tensor& t : tensors) s += actc::squared_norm(t.data());
  return s;
}

std::size_t Gradients::numel() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.numel();
  return n;
}

void check_batch(const ModelGraph& model, const Batch& batch) {
  if (batch.inputs.rank() != 2 || batch.inputs.cols() != model.input_dim()) {
    throw ShapeError("batch inputs " + shape_to_string(batch.inputs.shape()) + " do not match input_dim " +
                     std::to_string(model.input_dim()));
  }
  const std::size_t n = batch.size();
  if (model.loss_kind() == LossKind::softmax_ce) {
    if (batch.labels.size() != n) throw ShapeError("batch needs one label per row");
  } else if (batch.targets.shape() != Shape{n, model.output_dim()}) {
    throw ShapeError("batch targets " + shape_to_string(batch.targets.shape()) + " do not match [" +
                     std::to_string(n) + " x " + std::to_string(model.output_dim()) + "]");
  }
}

ForwardResult forward(const ModelGraph& model, const Parameters& params, const Batch& batch,
                      const CompressionScheme& scheme, const KeySet& keys) {
  model.check_params(params);
  check_batch(model, batch);
  scheme.validate();
  batch.inputs.require_finite("batch inputs");
  ForwardResult f;
  f.plan = model.plan(batch.size());
  const Capture cap{f.plan, scheme, keys, &f.store};
  RunResult r = run_nodes(model, params, batch, keys, 0, model.nodes().size(), batch.inputs, cap);
  f.loss = r.loss;
  f.output = std::move(r.value);
  return f;
}

Gradients backward(const ModelGraph& model, const ContextPlan& plan, const ContextStore& store) {
  Gradients g = empty_grads(model);
  (void)backprop_nodes(model, plan, store, 0, model.nodes().size(), std::nullopt, g);
  finish(g);
  return g;
}

namespace {

struct CheckpointForward {
  double loss = 0.0;
  Tensor output;
  ContextPlan plan;
  ContextStore store;  // segment inputs only
};

CheckpointForward checkpoint_forward(const ModelGraph& model, const Parameters& params,
                                     const Batch& batch, const CompressionScheme& scheme,
                                     const KeySet& keys) {
  if (!model.has_segments()) throw InvalidArgument("checkpointed backward needs segment boundaries");
  model.check_params(params);
  check_batch(model, batch);
  scheme.validate();
  batch.inputs.require_finite("batch inputs");
  CheckpointForward f;
  f.plan = model.plan(batch.size());
  const Capture none{f.plan, scheme, keys, nullptr};
  Tensor x = batch.inputs;
  RunResult r;
  for (const SegmentRange& seg : f.plan.segments) {
    const SlotInfo& in = f.plan.slot(seg.input_slot);
    f.store.offer(in, x, scheme.bits_for(in.id), scheme.group_size, keys.slot_key(in.id));
    r = run_nodes(model, params, batch, keys, seg.begin, seg.end, std::move(x), none);
    x = r.value;
  }
  f.loss = r.loss;
  f.output = std::move(r.value);
  return f;
}

Gradients checkpoint_backward(const ModelGraph& model, const Parameters& params, const Batch& batch,
                              const CompressionScheme& scheme, const KeySet& keys,
                              const CheckpointForward& f) {
  Gradients g = empty_grads(model);
  std::optional<Tensor> upstream;
  for (std::size_t s = f.plan.segments.size(); s-- > 0;) {
    const SegmentRange& seg = f.plan.segments[s];
    ContextStore local;
    const Capture cap{f.plan, scheme, keys, &local};
    (void)run_nodes(model, params, batch, keys, seg.begin, seg.end, f.store.load(seg.input_slot), cap);
    upstream = backprop_nodes(model, f.plan, local, seg.begin, seg.end, std::move(upstream), g);
  }
  finish(g);
  return g;
}

}  // namespace

Gradients checkpointed_backward(const ModelGraph& model, const Parameters& params, const Batch& batch,
                                const CompressionScheme& scheme, const KeySet& keys) {
  const CheckpointForward f = checkpoint_forward(model, params, batch, scheme, keys);
  return checkpoint_backward(model, params, batch, scheme, keys, f);
}

Episode run_episode(const ModelGraph& model, const Parameters& params, const Batch& batch,
                    const CompressionScheme& scheme, const KeySet& keys, BackwardMode mode) {
  Episode e;
  if (mode == BackwardMode::checkpointed) {
    CheckpointForward f = checkpoint_forward(model, params, batch, scheme, keys);
    e.grads = checkpoint_backward(model, params, batch, scheme, keys, f);
    e.loss = f.loss;
    e.accounting = f.store.accounting();
    e.output = std::move(f.output);
  } else {
    ForwardResult f = forward(model, params, batch, scheme, keys);
    e.grads = backward(model, f.plan, f.store);
    e.loss = f.loss;
    e.accounting = f.store.accounting();
    e.output = std::move(f.output);
  }
  return e;
}

}  // namespace actc
