#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "fusebench/error.hpp"

namespace fusebench {

// The five traits taken from one face image, in canonical order. Weight
// vectors, file columns and report rows all follow this order.
enum class TraitKind : std::size_t { Face = 0, Periocular = 1, Iris = 2, Nose = 3, Eyebrow = 4 };

inline constexpr std::size_t kTraitCount = 5;

inline constexpr std::array<TraitKind, kTraitCount> kAllTraits = {
    TraitKind::Face, TraitKind::Periocular, TraitKind::Iris, TraitKind::Nose, TraitKind::Eyebrow};

constexpr std::size_t index_of(TraitKind t) { return static_cast<std::size_t>(t); }

// Lowercase identifier used in files, configs and JSON keys.
constexpr std::string_view trait_id(TraitKind t) {
  constexpr std::array<std::string_view, kTraitCount> ids = {"face", "periocular", "iris", "nose",
                                                             "eyebrow"};
  return ids[index_of(t)];
}

// Column title used in rendered tables.
constexpr std::string_view trait_title(TraitKind t) {
  constexpr std::array<std::string_view, kTraitCount> titles = {"Face", "Periocular", "Iris",
                                                                "Nose", "Eyebrow"};
  return titles[index_of(t)];
}

inline std::optional<TraitKind> try_parse_trait(std::string_view s) {
  for (auto t : kAllTraits) {
    if (trait_id(t) == s) return t;
  }
  return std::nullopt;
}

inline TraitKind parse_trait(std::string_view s) {
  if (auto t = try_parse_trait(s)) return *t;
  throw ConfigError("unknown trait '" + std::string(s) + "'");
}

// Set of traits as a bitmask over canonical indices.
class TraitSet {
 public:
  constexpr TraitSet() = default;
  constexpr explicit TraitSet(unsigned bits) : bits_(bits & 0x1fu) {}

  static constexpr TraitSet all() { return TraitSet(0x1fu); }

  constexpr bool contains(TraitKind t) const { return (bits_ >> index_of(t)) & 1u; }
  constexpr void insert(TraitKind t) { bits_ |= 1u << index_of(t); }
  constexpr void erase(TraitKind t) { bits_ &= ~(1u << index_of(t)); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr unsigned bits() const { return bits_; }
  constexpr bool is_subset_of(TraitSet other) const { return (bits_ & ~other.bits_) == 0; }

  constexpr std::size_t size() const {
    std::size_t n = 0;
    for (unsigned b = bits_; b != 0; b &= b - 1) ++n;
    return n;
  }

  friend constexpr bool operator==(TraitSet, TraitSet) = default;

 private:
  unsigned bits_ = 0;
};

}  // namespace fusebench
