#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "atriaseg/volume.hpp"

namespace atriaseg {

/// Numeric encoding of the three foreground classes. Background is always 0.
/// The dataset encoding is not fixed, so every entry point accepts one.
struct LabelEncoding {
  std::uint8_t wall = 1;
  std::uint8_t ra = 2;
  std::uint8_t la = 3;

  /// Foreground classes in ascending default processing order.
  std::array<std::uint8_t, 3> classes() const { return {wall, ra, la}; }
  bool allows(std::uint8_t v) const { return v == 0 || v == wall || v == ra || v == la; }
  std::string_view name_of(std::uint8_t v) const;
  /// Resolves "wall" / "ra" / "la" (case-insensitive) to a value.
  std::uint8_t value_of(std::string_view name) const;
  /// Throws ConfigError unless the three values are distinct and nonzero.
  void validate() const;

  friend bool operator==(const LabelEncoding&, const LabelEncoding&) = default;
};

/// Out-of-set value found in a label map.
class LabelError : public Error {
 public:
  LabelError(std::uint8_t value, Index3 where);
  std::uint8_t value() const { return value_; }
  Index3 where() const { return where_; }

 private:
  std::uint8_t value_;
  Index3 where_;
};

void validate_labels(const LabelMap& labels, const LabelEncoding& encoding);

}  // namespace atriaseg
