#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "actc/model.hpp"
#include "actc/quantizer.hpp"

namespace actc {

using IndexPayload = std::vector<std::int64_t>;

/// Identifies a saved tensor for deduplication.
struct Footprint {
  ValueToken token;
  std::size_t numel = 0;
  std::uint64_t checksum = 0;
};

struct StoreAccounting {
  /// 32·D over activation slots, i.e. the cost of keeping them as fp32.
  std::uint64_t activation_raw_bits = 0;
  /// compressed_size_bits over activation slots.
  std::uint64_t activation_stored_bits = 0;
  /// The same two numbers restricted to slots stored below 32 bits.
  std::uint64_t quantized_raw_bits = 0;
  std::uint64_t quantized_stored_bits = 0;
  /// Every payload in the store, parameters and integer state included.
  std::uint64_t total_stored_bits = 0;
  std::size_t payloads = 0;
  std::size_t aliases = 0;

  /// fp32 bits over stored bits for the quantized activation payloads; 1 when none.
  [[nodiscard]] double compression_ratio() const noexcept;
  StoreAccounting& operator+=(const StoreAccounting& other) noexcept;
};

/// Saved-for-backward tensors keyed by slot.
///
/// Activation slots are quantized on entry; parameter and integer-state slots
/// are kept verbatim. A slot offered a second time with a matching footprint
/// becomes an alias of the stored payload and costs no extra bits.
class ContextStore {
 public:
  using Payload = std::variant<Tensor, QuantizedTensor, IndexPayload>;

  ContextStore() = default;

  /// Saves a tensor slot. `bits`, `group_size` and `key` only apply to activation slots.
  void offer(const SlotInfo& info, const Tensor& value, int bits, std::size_t group_size,
             StreamKey key);
  void offer_indices(const SlotInfo& info, IndexPayload indices);

  /// Replaces an activation slot with a raw tensor of the same shape.
  void overwrite_activation(SlotId slot, Tensor value);

  [[nodiscard]] bool contains(SlotId slot) const noexcept { return entries_.contains(slot); }
  [[nodiscard]] std::vector<SlotId> slot_ids() const;
  [[nodiscard]] const SlotInfo& info(SlotId slot) const;
  [[nodiscard]] const Payload& payload(SlotId slot) const;
  [[nodiscard]] std::size_t alias_count(SlotId slot) const;
  [[nodiscard]] int stored_bits(SlotId slot) const;

  /// Raw or dequantized tensor for a tensor slot.
  [[nodiscard]] Tensor load(SlotId slot) const;
  /// The stored tensor when the slot is kept raw, else nullptr.
  [[nodiscard]] const Tensor* raw_view(SlotId slot) const;
  [[nodiscard]] const IndexPayload& indices(SlotId slot) const;

  [[nodiscard]] StoreAccounting accounting() const;

 private:
  struct Entry {
    SlotInfo info;
    Footprint footprint;
    Payload payload;
    std::size_t aliases = 0;
    mutable std::optional<std::uint64_t> decoded_checksum;
  };

  Entry& entry(SlotId slot);
  const Entry& entry(SlotId slot) const;
  bool matches(const Entry& e, const Footprint& fp) const;

  std::map<SlotId, Entry> entries_;
};

}  // namespace actc
