#include "atriaseg/labels.hpp"

#include <algorithm>
#include <cctype>

namespace atriaseg {

std::string_view LabelEncoding::name_of(std::uint8_t v) const {
  if (v == 0) return "background";
  if (v == wall) return "wall";
  if (v == ra) return "ra";
  if (v == la) return "la";
  return "unknown";
}

std::uint8_t LabelEncoding::value_of(std::string_view name) const {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "wall") return wall;
  if (lower == "ra") return ra;
  if (lower == "la") return la;
  throw ConfigError("unknown class name '" + std::string(name) + "' (expected wall, ra or la)");
}

void LabelEncoding::validate() const {
  if (wall == 0 || ra == 0 || la == 0) {
    throw ConfigError("label values must be nonzero; 0 is background");
  }
  if (wall == ra || wall == la || ra == la) {
    throw ConfigError("label values for wall, ra and la must be distinct");
  }
}

LabelError::LabelError(std::uint8_t value, Index3 where)
    : Error("label value " + std::to_string(value) + " at voxel (" + std::to_string(where.x) +
            "," + std::to_string(where.y) + "," + std::to_string(where.z) +
            ") is outside the configured label set"),
      value_(value),
      where_(where) {}

void validate_labels(const LabelMap& labels, const LabelEncoding& encoding) {
  const auto data = labels.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!encoding.allows(data[i])) throw LabelError(data[i], labels.index(i));
  }
}

}  // namespace atriaseg
