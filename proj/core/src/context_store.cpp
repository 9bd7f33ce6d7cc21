#include "actc/context_store.hpp"

#include "actc/error.hpp"

namespace actc {

namespace {

std::uint64_t index_checksum(const IndexPayload& v) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ v.size();
  for (std::int64_t x : v) {
    h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

}  // namespace

double StoreAccounting::compression_ratio() const noexcept {
  if (quantized_stored_bits == 0) return 1.0;
  return static_cast<double>(quantized_raw_bits) / static_cast<double>(quantized_stored_bits);
}

StoreAccounting& StoreAccounting::operator+=(const StoreAccounting& o) noexcept {
  activation_raw_bits += o.activation_raw_bits;
  activation_stored_bits += o.activation_stored_bits;
  quantized_raw_bits += o.quantized_raw_bits;
  quantized_stored_bits += o.quantized_stored_bits;
  total_stored_bits += o.total_stored_bits;
  payloads += o.payloads;
  aliases += o.aliases;
  return *this;
}

ContextStore::Entry& ContextStore::entry(SlotId slot) {
  const auto it = entries_.find(slot);
  if (it == entries_.end()) throw ContextError("context slot " + std::to_string(slot) + " is missing");
  return it->second;
}

const ContextStore::Entry& ContextStore::entry(SlotId slot) const {
  const auto it = entries_.find(slot);
  if (it == entries_.end()) throw ContextError("context slot " + std::to_string(slot) + " is missing");
  return it->second;
}

bool ContextStore::matches(const Entry& e, const Footprint& fp) const {
  if (e.footprint.token != fp.token || e.footprint.numel != fp.numel) return false;
  if (e.footprint.checksum == fp.checksum) return true;
  // A recomputation may re-offer the decoded form of a quantized payload.
  if (const auto* q = std::get_if<QuantizedTensor>(&e.payload)) {
    if (!e.decoded_checksum) e.decoded_checksum = checksum(dequantize(*q).data());
    return *e.decoded_checksum == fp.checksum;
  }
  return false;
}

void ContextStore::offer(const SlotInfo& info, const Tensor& value, int bits,
                         std::size_t group_size, StreamKey key) {
  if (value.numel() != info.dims) {
    throw ShapeError("slot " + info.label + " expects " + std::to_string(info.dims) +
                     " elements, got " + std::to_string(value.numel()));
  }
  const Footprint fp{info.token, value.numel(), checksum(value.data())};
  if (auto it = entries_.find(info.id); it != entries_.end()) {
    if (!matches(it->second, fp)) {
      throw ContextError("footprint clash on slot " + info.label);
    }
    ++it->second.aliases;
    return;
  }
  Entry e{info, fp, Tensor{}, 0, std::nullopt};
  if (info.kind == SlotKind::activation && bits != kFullPrecisionBits) {
    e.payload = quantize(value, bits, group_size, key);
  } else {
    e.payload = value;
  }
  entries_.emplace(info.id, std::move(e));
}

void ContextStore::offer_indices(const SlotInfo& info, IndexPayload indices) {
  if (info.kind != SlotKind::state) {
    throw ContextError("index payloads belong to integer-state slots, not " + info.label);
  }
  const Footprint fp{info.token, indices.size(), index_checksum(indices)};
  if (auto it = entries_.find(info.id); it != entries_.end()) {
    if (!matches(it->second, fp)) throw ContextError("footprint clash on slot " + info.label);
    ++it->second.aliases;
    return;
  }
  entries_.emplace(info.id, Entry{info, fp, std::move(indices), 0, std::nullopt});
}

void ContextStore::overwrite_activation(SlotId slot, Tensor value) {
  Entry& e = entry(slot);
  if (e.info.kind != SlotKind::activation) {
    throw ContextError("only activation slots can be overwritten (" + e.info.label + ")");
  }
  if (value.numel() != e.info.dims) throw ShapeError("overwrite of " + e.info.label + " changes size");
  e.footprint.checksum = checksum(value.data());
  e.decoded_checksum.reset();
  e.payload = std::move(value);
}

std::vector<SlotId> ContextStore::slot_ids() const {
  std::vector<SlotId> ids;
  ids.reserve(entries_.size());
  for (const auto& [id, e] : entries_) ids.push_back(id);
  return ids;
}

const SlotInfo& ContextStore::info(SlotId slot) const { return entry(slot).info; }

const ContextStore::Payload& ContextStore::payload(SlotId slot) const { return entry(slot).payload; }

std::size_t ContextStore::alias_count(SlotId slot) const { return entry(slot).aliases; }

int ContextStore::stored_bits(SlotId slot) const {
  const Entry& e = entry(slot);
  if (const auto* q = std::get_if<QuantizedTensor>(&e.payload)) return q->bits;
  return kFullPrecisionBits;
}

Tensor ContextStore::load(SlotId slot) const {
  const Entry& e = entry(slot);
  if (const auto* t = std::get_if<Tensor>(&e.payload)) return *t;
  if (const auto* q = std::get_if<QuantizedTensor>(&e.payload)) return dequantize(*q);
  throw ContextError("slot " + e.info.label + " holds indices, not a tensor");
}

const Tensor* ContextStore::raw_view(SlotId slot) const {
  return std::get_if<Tensor>(&entry(slot).payload);
}

const IndexPayload& ContextStore::indices(SlotId slot) const {
  const Entry& e = entry(slot);
  if (const auto* v = std::get_if<IndexPayload>(&e.payload)) return *v;
  throw ContextError("slot " + e.info.label + " does not hold indices");
}

StoreAccounting ContextStore::accounting() const {
  StoreAccounting acc;
  for (const auto& [id, e] : entries_) {
    ++acc.payloads;
    acc.aliases += e.aliases;
    std::uint64_t stored = 0;
    if (const auto* t = std::get_if<Tensor>(&e.payload)) {
      stored = static_cast<std::uint64_t>(t->numel()) * scalar_bits(t->precision());
    } else if (const auto* q = std::get_if<QuantizedTensor>(&e.payload)) {
      stored = compressed_size_bits(*q);
    } else {
      stored = 32ULL * std::get<IndexPayload>(e.payload).size();
    }
    acc.total_stored_bits += stored;
    if (e.info.kind == SlotKind::activation) {
      const std::uint64_t fp32 = 32ULL * e.info.dims;
      acc.activation_raw_bits += fp32;
      acc.activation_stored_bits += stored;
      if (std::holds_alternative<QuantizedTensor>(e.payload)) {
        acc.quantized_raw_bits += fp32;
        acc.quantized_stored_bits += stored;
      }
    }
  }
  return acc;
}

}  // namespace actc
