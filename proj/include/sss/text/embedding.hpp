#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sss/error.hpp"
#include "sss/text/tokenize.hpp"
#include "sss/types.hpp"

namespace sss::text {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Word -> dense vector map of fixed width. In hash-random mode every word
/// (known or not) maps to a deterministic vector in [-1, 1]^D derived from
/// (seed, word); no file is needed.
class EmbeddingTable {
 public:
  enum class Mode { kLoaded, kHashRandom };

  static EmbeddingTable hash_random(std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ConfigError("embedding dim must be positive");
    EmbeddingTable t;
    t.dim_ = dim;
    t.mode_ = Mode::kHashRandom;
    t.seed_ = seed;
    return t;
  }

  static EmbeddingTable from_entries(std::size_t dim, std::span<const std::pair<std::string, std::vector<float>>> rows) {
    EmbeddingTable t;
    t.dim_ = dim;
    for (const auto& [word, vec] : rows) {
      if (vec.size() != dim) throw ShapeError("embedding for '" + word + "' has wrong width");
      t.insert(word, vec);
    }
    return t;
  }

  /// Word-per-line text format ("word v1 ... vD"). An optional leading
  /// "n dim" header line is detected and skipped. Duplicate words keep the
  /// last vector and are counted in duplicate_count().
  static EmbeddingTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);
    EmbeddingTable t;
    std::string line;
    long line_no = 0;
    std::vector<float> vec;
    while (std::getline(in, line)) {
      ++line_no;
      auto fields = detail::split_spaces(line);
      if (fields.empty()) continue;
      if (line_no == 1 && fields.size() == 2) {
        long n = 0, d = 0;
        if (detail::parse_number(fields[0], n) && detail::parse_number(fields[1], d)) continue;
      }
      if (fields.size() < 2) throw FormatError("embedding line has no values", line_no);
      const std::size_t d = fields.size() - 1;
      if (t.dim_ == 0) t.dim_ = d;
      if (d != t.dim_) {
        throw FormatError("embedding width " + std::to_string(d) + " differs from " + std::to_string(t.dim_),
                          line_no);
      }
      vec.resize(d);
      for (std::size_t j = 0; j < d; ++j) {
        if (!detail::parse_number(fields[j + 1], vec[j]) || !std::isfinite(vec[j])) {
          throw FormatError("bad embedding value '" + std::string(fields[j + 1]) + "'", line_no);
        }
      }
      t.insert(std::string(fields[0]), vec);
    }
    if (t.dim_ == 0) throw FormatError("embedding file " + path + " has no entries");
    return t;
  }

  std::size_t dim() const { return dim_; }
  Mode mode() const { return mode_; }
  std::size_t size() const { return index_.size(); }
  std::size_t duplicate_count() const { return duplicates_; }

  /// Copies the vector for `word` into `out` (length dim()). Returns false for OOV.
  bool lookup(std::string_view word, std::span<float> out) const {
    if (mode_ == Mode::kHashRandom) {
      std::uint64_t state = seed_ ^ detail::fnv1a(word);
      for (std::size_t j = 0; j < dim_; ++j) {
        const double u = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53;
        out[j] = static_cast<float>(2.0 * u - 1.0);
      }
      return true;
    }
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return false;
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_), dim_, out.begin());
    return true;
  }

  std::optional<std::vector<float>> lookup(std::string_view word) const {
    std::vector<float> v(dim_);
    if (!lookup(word, v)) return std::nullopt;
    return v;
  }

 private:
  void insert(const std::string& word, std::span<const float> vec) {
    auto [it, fresh] = index_.try_emplace(word, index_.size());
    if (fresh) {
      data_.insert(data_.end(), vec.begin(), vec.end());
    } else {
      ++duplicates_;
      std::copy(vec.begin(), vec.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    }
  }

  std::size_t dim_ = 0;
  Mode mode_ = Mode::kLoaded;
  std::uint64_t seed_ = 0;
  std::size_t duplicates_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> data_;
};

struct SequenceLookup {
  Image rows;  // L x D
  std::size_t oov_count = 0;
};

/// Stacks the vectors of in-vocabulary tokens in order. OOV tokens are
/// skipped; if none is found the result is a single zero row.
inline SequenceLookup lookup_sequence(const EmbeddingTable& table, const TokenList& tokens,
                                      std::size_t row_cap = static_cast<std::size_t>(-1)) {
  SequenceLookup out;
  const std::size_t d = table.dim();
  std::vector<float> buf;
  buf.reserve(std::min(tokens.size(), row_cap) * d);
  std::vector<float> vec(d);
  std::size_t found = 0;
  for (const auto& tok : tokens) {
    if (!table.lookup(tok, vec)) {
      ++out.oov_count;
      continue;
    }
    if (found < row_cap) buf.insert(buf.end(), vec.begin(), vec.end());
    ++found;
  }
  const std::size_t rows = std::min(found, row_cap);
  if (rows == 0) {
    out.rows = Image::Zero(1, static_cast<Eigen::Index>(d));
  } else {
    out.rows = Eigen::Map<const Image>(buf.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  }
  return out;
}

/// Mean of the looked-up rows (zero vector when fully OOV).
inline Vector mean_pool(const EmbeddingTable& table, const TokenList& tokens) {
  const auto seq = lookup_sequence(table, tokens);
  return seq.rows.cast<double>().colwise().mean().transpose();
}

}  // namespace sss::text
