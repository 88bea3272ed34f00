#pragma once

// Canonical feature files.
//
//   line 1   {"trait":"nose","dim":128,"count":1531,"subimages":1}
//   line 2+  subject_id,sample_id,v_0,...,v_{n-1}[,m_0,m_1,m_2,m_3]
//
// n = dim for ordinary traits and 4*dim for iris (subimage-major), followed by
// the four mask ratios for iris. Vector entries are IEEE-754 binary32 values
// written as the 8 lowercase hex digits of their little-endian bytes
// (1.0f -> "0000803f"). Adding "encoding":"decimal" to the header selects the
// plain-CSV variant with decimal floats. Mask ratios are always decimal.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusebench/core.hpp"
#include "fusebench/error.hpp"
#include "fusebench/traits.hpp"

namespace fusebench {

enum class FloatEncoding { Hex, Decimal };

namespace detail {

inline constexpr char kHexDigits[] = "0123456789abcdef";

inline void append_hex_f32(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int byte = 0; byte < 4; ++byte) {
    const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xffu);
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xfu]);
  }
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

inline bool parse_hex_f32(std::string_view s, float& out) {
  if (s.size() != 8) return false;
  std::uint32_t bits = 0;
  for (int byte = 0; byte < 4; ++byte) {
    const int hi = hex_value(s[2 * byte]);
    const int lo = hex_value(s[2 * byte + 1]);
    if (hi < 0 || lo < 0) return false;
    bits |= static_cast<std::uint32_t>(hi * 16 + lo) << (8 * byte);
  }
  out = std::bit_cast<float>(bits);
  return true;
}

template <class T>
void append_shortest(std::string& out, T v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

template <class T>
bool parse_decimal(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline bool valid_id(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id) {
    if (c == ',' || c == '"' || static_cast<unsigned char>(c) <= ' ') return false;
  }
  return true;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline void write_features(std::ostream& os, const TraitFeatures& f, FloatEncoding enc = FloatEncoding::Hex) {
  const bool iris = f.trait == TraitKind::Iris;
  nlohmann::ordered_json header;
  header["trait"] = std::string(trait_id(f.trait));
  header["dim"] = f.dim;
  header["count"] = f.size();
  header["subimages"] = iris ? kIrisSubimages : 1;
  if (enc == FloatEncoding::Decimal) header["encoding"] = "decimal";
  os << header.dump() << '\n';

  std::string line;
  auto emit = [&](float v) {
    line.push_back(',');
    if (enc == FloatEncoding::Hex) {
      detail::append_hex_f32(line, v);
    } else {
      detail::append_shortest(line, v);
    }
  };
  for (std::size_t i = 0; i < f.size(); ++i) {
    const SampleKey& key = f.key_at(i);
    if (!detail::valid_id(key.subject_id) || !detail::valid_id(key.sample_id)) {
      throw IngestError("identifier not representable in feature file: '" + to_string(key) + "'");
    }
    line.clear();
    line += key.subject_id;
    line.push_back(',');
    line += key.sample_id;
    if (iris) {
      const auto& r = f.iris[i];
      for (const auto& sub : r.subvectors) {
        for (float v : sub) emit(v);
      }
      for (double m : r.mask_ratios) {
        line.push_back(',');
        detail::append_shortest(line, m);
      }
    } else {
      for (float v : f.plain[i].vector) emit(v);
    }
    line.push_back('\n');
    os << line;
  }
}

inline TraitFeatures read_features(std::istream& is, const std::string& source) {
  auto fail = [&](std::size_t line_no, const std::string& field, const std::string& why) -> IngestError {
    std::string msg = source + ":" + std::to_string(line_no);
    if (!field.empty()) msg += ": field " + field;
    return IngestError(msg + ": " + why);
  };

  std::string line;
  if (!std::getline(is, line)) throw fail(1, "", "missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(detail::strip_cr(line));
  } catch (const nlohmann::json::exception& e) {
    throw fail(1, "header", std::string("malformed JSON header: ") + e.what());
  }
  if (!header.is_object()) throw fail(1, "header", "header must be a JSON object");

  TraitFeatures f;
  std::size_t count = 0;
  std::size_t subimages = 0;
  FloatEncoding enc = FloatEncoding::Hex;
  try {
    const auto trait = try_parse_trait(header.at("trait").get<std::string>());
    if (!trait) throw fail(1, "trait", "unknown trait '" + header.at("trait").get<std::string>() + "'");
    f.trait = *trait;
    f.dim = header.at("dim").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
    subimages = header.at("subimages").get<std::size_t>();
    if (header.contains("encoding")) {
      const auto e = header.at("encoding").get<std::string>();
      if (e == "decimal") {
        enc = FloatEncoding::Decimal;
      } else if (e != "hex") {
        throw fail(1, "encoding", "unknown encoding '" + e + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(1, "header", std::string("bad header field: ") + e.what());
  }
  if (f.dim < 1) throw fail(1, "dim", "dimension must be >= 1");
  const bool iris = f.trait == TraitKind::Iris;
  if (subimages != (iris ? kIrisSubimages : 1)) {
    throw fail(1, "subimages", iris ? "iris files must have 4 subimages" : "non-iris files must have 1 subimage");
  }

  const std::size_t values = f.dim * subimages;
  const std::size_t fields = 2 + values + (iris ? kIrisSubimages : 0);
  std::size_t line_no = 1;
  std::vector<float> buffer(values);
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view text = detail::strip_cr(line);
    if (text.empty()) continue;
    const auto parts = detail::split_commas(text);
    if (parts.size() != fields) {
      throw fail(line_no, "", "expected " + std::to_string(fields) + " fields, found " + std::to_string(parts.size()));
    }
    if (!detail::valid_id(parts[0])) throw fail(line_no, "1 (subject_id)", "invalid identifier");
    if (!detail::valid_id(parts[1])) throw fail(line_no, "2 (sample_id)", "invalid identifier");
    SampleKey key{std::string(parts[0]), std::string(parts[1])};
    for (std::size_t i = 0; i < values; ++i) {
      const bool ok = enc == FloatEncoding::Hex ? detail::parse_hex_f32(parts[2 + i], buffer[i])
                                                : detail::parse_decimal(parts[2 + i], buffer[i]);
      if (!ok) throw fail(line_no, std::to_string(3 + i), "cannot parse float '" + std::string(parts[2 + i]) + "'");
    }
    try {
      if (iris) {
        std::array<std::vector<float>, kIrisSubimages> subs;
        for (std::size_t s = 0; s < kIrisSubimages; ++s) {
          subs[s].assign(buffer.begin() + static_cast<std::ptrdiff_t>(s * f.dim),
                         buffer.begin() + static_cast<std::ptrdiff_t>((s + 1) * f.dim));
        }
        std::array<double, kIrisSubimages> ratios{};
        for (std::size_t s = 0; s < kIrisSubimages; ++s) {
          const auto field = parts[2 + values + s];
          if (!detail::parse_decimal(field, ratios[s])) {
            throw fail(line_no, std::to_string(3 + values + s), "cannot parse mask ratio '" + std::string(field) + "'");
          }
        }
        f.iris.push_back(IrisRecord::make(std::move(key), std::move(subs), ratios));
      } else {
        f.plain.push_back(FeatureRecord::make(std::move(key), f.trait, buffer));
      }
    } catch (const IngestError& e) {
      if (std::string_view(e.what()).starts_with(source)) throw;
      throw fail(line_no, "", e.what());
    }
  }
  if (f.size() != count) {
    throw fail(1, "count", "header declares " + std::to_string(count) + " records, file has " + std::to_string(f.size()));
  }
  return f;
}

inline TraitFeatures read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestError(path.string() + ": cannot open feature file");
  return read_features(is, path.string());
}

inline void write_features(const std::filesystem::path& path, const TraitFeatures& f,
                           FloatEncoding enc = FloatEncoding::Hex) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IngestError(path.string() + ": cannot open for writing");
  write_features(os, f, enc);
  if (!os) throw IngestError(path.string() + ": write failed");
}

}  // namespace fusebench
