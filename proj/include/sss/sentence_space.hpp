#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sss/error.hpp"
#include "sss/stream.hpp"
#include "sss/text/embedding.hpp"
#include "sss/text/tokenize.hpp"
#include "sss/types.hpp"

namespace sss {

enum class Normalize { kNone, kStandardize };

struct EncoderConfig {
  std::size_t target_height = 200;
  std::size_t row_cap = 400;
  Normalize normalize = Normalize::kNone;

  void validate() const {
    if (target_height < 1) throw ConfigError("target_height must be >= 1");
    if (row_cap < 1) throw ConfigError("row_cap must be >= 1");
  }
};

/// A chunk of encoded texts. Every image is target_height x embedding dim.
struct ImageChunk {
  std::size_t index = 0;
  std::vector<Image> images;
  Labels labels;

  std::size_t size() const { return images.size(); }
};

/// Resamples the rows of an L x W matrix to `height` rows; columns are untouched.
/// Half-pixel centers with edge clamping:
///   s(i) = clamp((i + 0.5) * L / H - 0.5, 0, L - 1)
///   out(i) = (1 - f) * in(floor(s)) + f * in(min(floor(s) + 1, L - 1)),  f = s - floor(s)
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bilinear_resize_height(
    const Eigen::MatrixBase<Derived>& in, Eigen::Index height) {
  using Scalar = typename Derived::Scalar;
  using Out = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (height < 1) throw std::invalid_argument("resize height must be >= 1, got " + std::to_string(height));
  const Eigen::Index rows = in.rows();
  if (rows < 1) throw std::invalid_argument("resize input has no rows");
  Out out(height, in.cols());
  const double scale = static_cast<double>(rows) / static_cast<double>(height);
  for (Eigen::Index i = 0; i < height; ++i) {
    double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(rows - 1));
    const auto lo = static_cast<Eigen::Index>(std::floor(s));
    const Eigen::Index hi = std::min(lo + 1, rows - 1);
    const auto f = static_cast<Scalar>(s - static_cast<double>(lo));
    out.row(i) = (Scalar(1) - f) * in.row(lo) + f * in.row(hi);
  }
  return out;
}

/// Text -> tokens -> embedding rows (capped) -> height resize -> optional standardization.
inline Image encode_text(const text::EmbeddingTable& table, std::string_view text, const EncoderConfig& config) {
  const auto seq = text::lookup_sequence(table, text::tokenize(text), config.row_cap);
  Image img = bilinear_resize_height(seq.rows, static_cast<Eigen::Index>(config.target_height));
  if (config.normalize == Normalize::kStandardize) {
    const double mean = img.cast<double>().mean();
    const double var = (img.cast<double>().array() - mean).square().mean();
    const double sd = std::sqrt(var);
    img = (img.array() - static_cast<float>(mean)).matrix();
    if (sd >= 1e-12) img /= static_cast<float>(sd);
  }
  return img;
}

inline ImageChunk encode_chunk(const text::EmbeddingTable& table, std::size_t index,
                               std::span<const std::string> texts, const EncoderConfig& config) {
  ImageChunk out;
  out.index = index;
  out.images.reserve(texts.size());
  for (const auto& t : texts) out.images.push_back(encode_text(table, t, config));
  return out;
}

inline ImageChunk encode_chunk(const text::EmbeddingTable& table, const TextChunk& chunk, const EncoderConfig& config) {
  ImageChunk out = encode_chunk(table, chunk.index, chunk.texts, config);
  out.labels = chunk.labels;
  return out;
}

/// ASCII PGM (P2). Pixels are round(255 * (v - min) / (max - min)) using the
/// image's own min and max; a constant image maps to 128 everywhere.
inline std::string to_pgm(const Image& img) {
  const double lo = img.size() ? static_cast<double>(img.minCoeff()) : 0.0;
  const double hi = img.size() ? static_cast<double>(img.maxCoeff()) : 0.0;
  std::ostringstream os;
  os << "P2\n";
  char comment[160];
  std::snprintf(comment, sizeof comment,
                "# pixel = round(255*(v-min)/(max-min)), min=%.9g max=%.9g, constant image -> 128\n", lo, hi);
  os << comment;
  os << img.cols() << ' ' << img.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      int px = 128;
      if (hi > lo) px = static_cast<int>(std::lround(255.0 * (static_cast<double>(img(r, c)) - lo) / (hi - lo)));
      os << px << (c + 1 == img.cols() ? '\n' : ' ');
    }
  }
  return os.str();
}

inline void write_pgm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << to_pgm(img);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace sss
