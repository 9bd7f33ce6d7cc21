#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "actc/context_store.hpp"
#include "actc/model.hpp"
#include "actc/rng.hpp"
#include "actc/scheme.hpp"

namespace actc {

/// One mini-batch. Classification models read `labels`, regression models `targets`.
struct Batch {
  Tensor inputs;
  std::vector<std::int64_t> labels;
  Tensor targets;

  [[nodiscard]] std::size_t size() const { return inputs.rank() == 2 ? inputs.rows() : 0; }
};

/// Rounding keys for every context slot of an episode.
///
/// Slot l draws from StreamKey{seed, l} unless an override replaces the seed
/// for that slot. Dropout masks come from a separate stream family that
/// overrides never touch.
struct KeySet {
  std::uint64_t seed = 0;
  std::map<SlotId, std::uint64_t> overrides;

  [[nodiscard]] StreamKey slot_key(SlotId slot) const;
  [[nodiscard]] StreamKey dropout_key(std::size_t node) const;
  /// Copy with `slot` re-seeded.
  [[nodiscard]] KeySet with_override(SlotId slot, std::uint64_t slot_seed) const;
};

/// Parameter gradients, index-aligned with the model's parameters.
struct Gradients {
  std::vector<Tensor> tensors;

  [[nodiscard]] std::vector<double> flat() const;
  [[nodiscard]] double squared_norm() const;
  [[nodiscard]] std::size_t numel() const;
};

struct ForwardResult {
  double loss = 0.0;
  /// Values entering the loss node (logits or predictions).
  Tensor output;
  ContextPlan plan;
  ContextStore store;
};

enum class BackwardMode { plain, checkpointed };

/// Runs the model, saving context into a store under `scheme`.
///
/// The forward values themselves are never compressed, so the loss does not
/// depend on the scheme.
[[nodiscard]] ForwardResult forward(const ModelGraph& model, const Parameters& params,
                                    const Batch& batch, const CompressionScheme& scheme,
                                    const KeySet& keys);

/// Vector-Jacobian products of every node evaluated on the stored context.
[[nodiscard]] Gradients backward(const ModelGraph& model, const ContextPlan& plan,
                                 const ContextStore& store);

/// Stores only segment inputs; each segment is re-run from its decoded input
/// during the backward sweep. Requires declared segment boundaries.
[[nodiscard]] Gradients checkpointed_backward(const ModelGraph& model, const Parameters& params,
                                              const Batch& batch, const CompressionScheme& scheme,
                                              const KeySet& keys);

struct Episode {
  double loss = 0.0;
  Tensor output;
  Gradients grads;
  /// Accounting of the long-lived store: all context in plain mode, segment inputs when checkpointed.
  StoreAccounting accounting;
};

[[nodiscard]] Episode run_episode(const ModelGraph& model, const Parameters& params,
                                  const Batch& batch, const CompressionScheme& scheme,
                                  const KeySet& keys, BackwardMode mode = BackwardMode::plain);

/// Throws ShapeError unless the batch matches the model's input and loss.
void check_batch(const ModelGraph& model, const Batch& batch);

}  // namespace actc
