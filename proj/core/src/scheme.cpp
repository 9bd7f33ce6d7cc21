#include "actc/scheme.hpp"

#include "actc/error.hpp"

namespace actc {

int CompressionScheme::bits_for(SlotId slot) const noexcept {
  if (forced_fullprec.contains(slot)) return kFullPrecisionBits;
  const auto it = bits_per_slot.find(slot);
  return it == bits_per_slot.end() ? kFullPrecisionBits : it->second;
}

void CompressionScheme::validate() const {
  if (group_size < 2) throw InvalidArgument("scheme group size must be at least 2");
  for (const auto& [slot, bits] : bits_per_slot) {
    if (!is_codec_width(bits)) {
      throw InvalidArgument("slot " + std::to_string(slot) + " has unsupported width " +
                            std::to_string(bits));
    }
  }
}

double CompressionScheme::average_bits(const std::map<SlotId, std::size_t>& dims) const {
  double weighted = 0.0, total = 0.0;
  for (const auto& [slot, d] : dims) {
    weighted += static_cast<double>(bits_for(slot)) * static_cast<double>(d);
    total += static_cast<double>(d);
  }
  return total > 0.0 ? weighted / total : 0.0;
}

CompressionScheme CompressionScheme::uniform(const std::vector<SlotId>& slots, int bits,
                                             std::size_t group_size) {
  CompressionScheme s;
  s.group_size = group_size;
  for (SlotId id : slots) s.bits_per_slot[id] = bits;
  s.validate();
  return s;
}

}  // namespace actc
