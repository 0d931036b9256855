#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sss/error.hpp"
#include "sss/text/embedding.hpp"
#include "sss/types.hpp"

namespace sss::ingest {

/// Column mapping for a tab-separated, header-first dataset. Defaults follow
/// the Fakeddit release layout.
struct TsvSchema {
  std::string text_column = "clean_title";
  std::string label_column = "2_way_label";
  std::string timestamp_column = "created_utc";
  // Keep only rows whose filter column equals filter_value.
  std::optional<std::pair<std::string, std::string>> filter;
  int n_classes = 2;
};

struct LoadResult {
  std::vector<Sample> samples;
  std::size_t filtered_rows = 0;
  std::size_t bad_timestamp_rows = 0;
  std::size_t bad_label_rows = 0;
  std::size_t malformed_rows = 0;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline std::optional<int> parse_label(std::string_view s, int n_classes) {
  // Accept "1" as well as float spellings like "1.0".
  double v = 0;
  if (!text::detail::parse_number(s, v) || v != std::floor(v)) return std::nullopt;
  if (v < 0 || v >= n_classes) return std::nullopt;
  return static_cast<int>(v);
}

}  // namespace detail

/// Reads a TSV dataset, applies the filter predicate, and returns samples
/// sorted ascending by numeric timestamp (stable: ties keep file order).
/// Rows with a bad timestamp or label are skipped and counted.
inline LoadResult load_tsv(std::istream& in, const TsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("TSV input is empty (no header row)");
  const auto header = detail::split_tabs(detail::strip_cr(line));
  auto column_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ConfigError("TSV column '" + name + "' not found in header");
  };
  const std::size_t text_col = column_of(schema.text_column);
  const std::size_t label_col = column_of(schema.label_column);
  const std::size_t time_col = column_of(schema.timestamp_column);
  std::optional<std::size_t> filter_col;
  if (schema.filter) filter_col = column_of(schema.filter->first);

  LoadResult result;
  std::vector<std::pair<double, Sample>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::strip_cr(line);
    if (view.empty()) continue;
    const auto fields = detail::split_tabs(view);
    if (fields.size() != header.size()) {
      ++result.malformed_rows;
      continue;
    }
    if (filter_col && fields[*filter_col] != schema.filter->second) {
      ++result.filtered_rows;
      continue;
    }
    double ts = 0;
    if (!text::detail::parse_number(fields[time_col], ts) || !std::isfinite(ts)) {
      ++result.bad_timestamp_rows;
      continue;
    }
    const auto label = detail::parse_label(fields[label_col], schema.n_classes);
    if (!label) {
      ++result.bad_label_rows;
      continue;
    }
    rows.emplace_back(ts, Sample{std::string(fields[text_col]), *label});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  result.samples.reserve(rows.size());
  for (auto& [ts, s] : rows) result.samples.push_back(std::move(s));
  return result;
}

inline LoadResult load_tsv(const std::string& path, const TsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open TSV file: " + path);
  return load_tsv(in, schema);
}

/// Writes samples in the input TSV layout, timestamp = running sample index.
inline void write_tsv(std::ostream& out, const std::vector<Sample>& samples, const TsvSchema& schema = {}) {
  out << schema.text_column << '\t' << schema.label_column << '\t' << schema.timestamp_column << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << samples[i].text << '\t' << samples[i].label << '\t' << i << '\n';
  }
}

struct SynthConfig {
  std::size_t n_chunks = 100;
  std::size_t chunk_size = 250;
  std::size_t vocab_per_class = 50;
  std::size_t min_words = 3;
  std::size_t max_words = 50;
  // (chunk fraction, positive prior) breakpoints, linearly interpolated.
  std::vector<std::pair<double, double>> prior_schedule{{0.0, 0.2}, {0.75, 0.5}, {1.0, 0.8}};
  double noise_rate = 0.1;
  std::uint64_t seed = 0;

  void validate(std::size_t row_cap = 400) const {
    if (n_chunks == 0 || chunk_size == 0 || vocab_per_class == 0) {
      throw ConfigError("synthetic n_chunks, chunk_size and vocab_per_class must be positive");
    }
    if (min_words == 0 || min_words > max_words) throw ConfigError("synthetic words_per_text range is invalid");
    if (max_words > row_cap) throw ConfigError("synthetic max_words exceeds the encoder row cap");
    if (prior_schedule.empty()) throw ConfigError("synthetic prior_schedule is empty");
    for (std::size_t i = 0; i < prior_schedule.size(); ++i) {
      const auto [frac, p] = prior_schedule[i];
      if (!(p > 0 && p < 1)) throw ConfigError("synthetic priors must lie in (0, 1)");
      if (i > 0 && !(frac > prior_schedule[i - 1].first)) {
        throw ConfigError("synthetic prior breakpoints must be strictly increasing");
      }
    }
    if (!(noise_rate >= 0 && noise_rate <= 1)) throw ConfigError("noise_rate must lie in [0, 1]");
  }

  /// Position of chunk k in [0, 1]: k / (n_chunks - 1).
  double chunk_fraction(std::size_t k) const {
    return n_chunks > 1 ? static_cast<double>(k) / static_cast<double>(n_chunks - 1) : 0.0;
  }

  /// Schedule value at `fraction`, held constant beyond the outer breakpoints.
  double prior_at(double fraction) const {
    if (fraction <= prior_schedule.front().first) return prior_schedule.front().second;
    for (std::size_t i = 1; i < prior_schedule.size(); ++i) {
      const auto [f1, p1] = prior_schedule[i];
      if (fraction <= f1) {
        const auto [f0, p0] = prior_schedule[i - 1];
        return p0 + (p1 - p0) * (fraction - f0) / (f1 - f0);
      }
    }
    return prior_schedule.back().second;
  }
};

inline std::string synthetic_word(int cls, std::size_t i) {
  return "c" + std::to_string(cls) + "w" + std::to_string(i);
}

/// Binary stream with a drifting positive prior. Each text draws its words
/// from its class vocabulary; each word is swapped for one from the other
/// class with probability noise_rate.
inline std::vector<Sample> generate_synthetic(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> n_words(config.min_words, config.max_words);
  std::uniform_int_distribution<std::size_t> word(0, config.vocab_per_class - 1);
  std::bernoulli_distribution corrupt(config.noise_rate);

  std::vector<Sample> out;
  out.reserve(config.n_chunks * config.chunk_size);
  for (std::size_t k = 0; k < config.n_chunks; ++k) {
    std::bernoulli_distribution positive(config.prior_at(config.chunk_fraction(k)));
    for (std::size_t i = 0; i < config.chunk_size; ++i) {
      Sample s;
      s.label = positive(rng) ? 1 : 0;
      const std::size_t len = n_words(rng);
      for (std::size_t w = 0; w < len; ++w) {
        const int cls = corrupt(rng) ? 1 - s.label : s.label;
        if (w) s.text += ' ';
        s.text += synthetic_word(cls, word(rng));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

struct VectorFile {
  std::size_t n_samples = 0;
  std::size_t dim = 0;
  Matrix values;
};

/// "n_samples dim" header followed by one whitespace-separated row per sample.
inline VectorFile load_vector_file(std::istream& in) {
  std::string line;
  long line_no = 0;
  VectorFile vf;
  while (std::getline(in, line)) {
    ++line_no;
    if (!text::detail::split_spaces(line).empty()) break;
  }
  const auto head = text::detail::split_spaces(line);
  if (head.size() != 2 || !text::detail::parse_number(head[0], vf.n_samples) ||
      !text::detail::parse_number(head[1], vf.dim)) {
    throw FormatError("vector file header must be 'n_samples dim'", line_no);
  }
  vf.values.resize(static_cast<Eigen::Index>(vf.n_samples), static_cast<Eigen::Index>(vf.dim));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = text::detail::split_spaces(line);
    if (fields.empty()) continue;
    if (row >= vf.n_samples) throw FormatError("vector file has more rows than its header declares", line_no);
    if (fields.size() != vf.dim) {
      throw FormatError("expected " + std::to_string(vf.dim) + " values, found " + std::to_string(fields.size()),
                        line_no);
    }
    for (std::size_t j = 0; j < vf.dim; ++j) {
      double v = 0;
      if (!text::detail::parse_number(fields[j], v) || !std::isfinite(v)) {
        throw FormatError("non-finite or unparseable value '" + std::string(fields[j]) + "'", line_no);
      }
      vf.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = v;
    }
    ++row;
  }
  if (row != vf.n_samples) {
    throw FormatError("vector file declares " + std::to_string(vf.n_samples) + " rows but has " + std::to_string(row));
  }
  return vf;
}

inline VectorFile load_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vector file: " + path);
  return load_vector_file(in);
}

/// One integer label per non-empty line.
inline Labels load_label_file(const std::string& path, int n_classes = 2) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label file: " + path);
  Labels labels;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto v = detail::strip_cr(line);
    if (v.empty()) continue;
    const auto y = detail::parse_label(v, n_classes);
    if (!y) throw FormatError("bad label '" + std::string(v) + "'", line_no);
    labels.push_back(*y);
  }
  return labels;
}

}  // namespace sss::ingest
