#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sss/error.hpp"
#include "sss/metrics.hpp"
#include "sss/types.hpp"

namespace sss {

struct StreamConfig {
  std::size_t chunk_size = 250;
  int n_classes = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (chunk_size < 2) throw ConfigError("chunk_size must be >= 2");
    if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
  }
};

/// One non-overlapping stream window.
struct TextChunk {
  std::size_t index = 0;
  std::vector<std::string> texts;
  Labels labels;

  std::size_t size() const { return texts.size(); }
};

/// The part of a chunk a featurizer may see. Labels are deliberately absent.
struct TextView {
  std::size_t index = 0;
  std::span<const std::string> texts;
};

/// Splits an ordered sample sequence into floor(n / chunk_size) chunks; the
/// trailing remainder is dropped.
inline std::vector<TextChunk> chunk_stream(std::span<const Sample> samples, const StreamConfig& config) {
  config.validate();
  const std::size_t n_chunks = samples.size() / config.chunk_size;
  std::vector<TextChunk> chunks(n_chunks);
  for (std::size_t k = 0; k < n_chunks; ++k) {
    TextChunk& chunk = chunks[k];
    chunk.index = k;
    chunk.texts.reserve(config.chunk_size);
    chunk.labels.reserve(config.chunk_size);
    for (std::size_t i = k * config.chunk_size; i < (k + 1) * config.chunk_size; ++i) {
      const int y = samples[i].label;
      if (y < 0 || y >= config.n_classes) {
        throw ConfigError("label " + std::to_string(y) + " outside [0, " + std::to_string(config.n_classes) +
                          ") at sample " + std::to_string(i));
      }
      chunk.texts.push_back(samples[i].text);
      chunk.labels.push_back(y);
    }
  }
  return chunks;
}

/// Per-chunk class frequencies, each vector of length n_classes summing to 1.
inline std::vector<std::vector<double>> prior_trace(std::span<const TextChunk> chunks, int n_classes = 2) {
  std::vector<std::vector<double>> out;
  out.reserve(chunks.size());
  for (const auto& chunk : chunks) {
    std::vector<double> p(n_classes, 0.0);
    for (int y : chunk.labels) p.at(y) += 1.0;
    if (!chunk.labels.empty()) {
      for (double& v : p) v /= static_cast<double>(chunk.labels.size());
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Chunk-level learner driven by the Test-Then-Train loop.
template <class Features>
class ChunkClassifier {
 public:
  virtual ~ChunkClassifier() = default;
  virtual Labels predict(const Features& features) = 0;
  virtual void partial_fit(const Features& features, std::span<const int> labels) = 0;
};

struct PhaseTimes {
  double extract_seconds = 0;
  double predict_seconds = 0;
  double train_seconds = 0;
};

struct EvalRecord {
  std::size_t chunk = 0;
  ConfusionMatrix confusion;
  MetricRow metrics;
  double prior_pos = 0;
  PhaseTimes times;
};

/// Driver events, emitted in the order they happen. Used to audit that a
/// chunk's labels are only released to the classifier after its prediction.
enum class DriverEvent { kExtract, kPredict, kRevealLabels, kTrain };

struct DriverHooks {
  std::function<void(const EvalRecord&)> on_record;
  std::function<void(DriverEvent, std::size_t)> on_event;
};

/// Runs prequential Test-Then-Train: chunk 0 is fit only; every later chunk
/// is predicted, scored, then used for training. Returns one record per
/// evaluated chunk. `featurize` receives a label-free view of each chunk.
template <class Features, class Featurizer>
std::vector<EvalRecord> run_test_then_train(std::span<const TextChunk> chunks, ChunkClassifier<Features>& classifier,
                                            Featurizer&& featurize, const DriverHooks& hooks = {}) {
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };
  auto emit = [&](DriverEvent e, std::size_t k) {
    if (hooks.on_event) hooks.on_event(e, k);
  };

  std::vector<EvalRecord> records;
  if (!chunks.empty()) records.reserve(chunks.size() - 1);
  for (std::size_t pos = 0; pos < chunks.size(); ++pos) {
    const TextChunk& chunk = chunks[pos];
    EvalRecord rec;
    rec.chunk = chunk.index;

    emit(DriverEvent::kExtract, chunk.index);
    auto t0 = clock::now();
    Features features = [&] {
      try {
        return featurize(TextView{chunk.index, chunk.texts});
      } catch (const std::exception& e) {
        throw std::runtime_error("feature extraction failed on chunk " + std::to_string(chunk.index) + ": " +
                                 e.what());
      }
    }();
    rec.times.extract_seconds = seconds_since(t0);

    const bool evaluate = pos > 0;
    if (evaluate) {
      emit(DriverEvent::kPredict, chunk.index);
      t0 = clock::now();
      const Labels predicted = classifier.predict(features);
      rec.times.predict_seconds = seconds_since(t0);
      emit(DriverEvent::kRevealLabels, chunk.index);
      rec.confusion = ConfusionMatrix::from_predictions(chunk.labels, predicted);
      rec.metrics = compute_metrics(rec.confusion);
      std::size_t n_pos = 0;
      for (int y : chunk.labels) n_pos += (y == 1);
      rec.prior_pos = chunk.labels.empty() ? 0.0 : static_cast<double>(n_pos) / chunk.labels.size();
    } else {
      emit(DriverEvent::kRevealLabels, chunk.index);
    }

    emit(DriverEvent::kTrain, chunk.index);
    t0 = clock::now();
    classifier.partial_fit(features, chunk.labels);
    rec.times.train_seconds = seconds_since(t0);

    if (evaluate) {
      if (hooks.on_record) hooks.on_record(rec);
      records.push_back(rec);
    }
  }
  return records;
}

}  // namespace sss
