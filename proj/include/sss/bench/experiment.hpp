#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sss/baselines/hoeffding_tree.hpp"
#include "sss/baselines/kue.hpp"
#include "sss/baselines/learnpp.hpp"
#include "sss/baselines/online_bagging.hpp"
#include "sss/bench/config.hpp"
#include "sss/ingest.hpp"
#include "sss/metrics.hpp"
#include "sss/sentence_space.hpp"
#include "sss/sss_classifier.hpp"
#include "sss/stream.hpp"
#include "sss/text/embedding.hpp"
#include "sss/text/pca.hpp"
#include "sss/text/tfidf.hpp"

namespace sss::bench {

/// Loaded stream: chunks plus, for the vectors source, the aligned
/// per-sample feature rows.
struct StreamData {
  std::vector<TextChunk> chunks;
  std::optional<Matrix> vectors;
};

inline StreamData load_stream(const ExperimentConfig& config) {
  StreamConfig sc{config.chunk_size, config.n_classes, config.seed};
  StreamData data;
  std::vector<Sample> samples;
  switch (config.source) {
    case Source::kSynth:
      samples = ingest::generate_synthetic(config.synth);
      break;
    case Source::kTsv: {
      auto loaded = ingest::load_tsv(config.tsv_path, config.schema);
      const std::size_t skipped = loaded.bad_label_rows + loaded.bad_timestamp_rows + loaded.malformed_rows;
      if (skipped > 0) {
        std::cerr << "warning: skipped " << loaded.bad_timestamp_rows << " rows with bad timestamps, "
                  << loaded.bad_label_rows << " with bad labels, " << loaded.malformed_rows << " malformed\n";
      }
      samples = std::move(loaded.samples);
      break;
    }
    case Source::kVectors: {
      auto vf = ingest::load_vector_file(config.vectors_path);
      const Labels labels = ingest::load_label_file(config.labels_path, config.n_classes);
      if (labels.size() != vf.n_samples) {
        throw ConfigError("vector file has " + std::to_string(vf.n_samples) + " rows but label file has " +
                          std::to_string(labels.size()));
      }
      samples.resize(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) samples[i].label = labels[i];
      data.vectors = std::move(vf.values);
      break;
    }
  }
  data.chunks = chunk_stream(samples, sc);
  if (config.max_chunks > 0 && data.chunks.size() > config.max_chunks) data.chunks.resize(config.max_chunks);
  return data;
}

inline text::EmbeddingTable make_embeddings(const ExperimentConfig& config) {
  if (config.embeddings == "hash-random") return text::EmbeddingTable::hash_random(config.embedding_dim, config.seed);
  return text::EmbeddingTable::load(config.embeddings);
}

/// Sample-parallel chunk encoding. Output is identical to the serial path.
inline ImageChunk encode_view(const text::EmbeddingTable& table, const TextView& view, const EncoderConfig& encoder,
                              unsigned threads) {
  if (threads <= 1 || view.texts.size() < 2) return encode_chunk(table, view.index, view.texts, encoder);
  ImageChunk out;
  out.index = view.index;
  out.images.resize(view.texts.size());
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < view.texts.size(); i += threads) {
        out.images[i] = encode_text(table, view.texts[i], encoder);
      }
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

/// Tabular features for the reference methods. TF-IDF and PCA are fitted on
/// the first chunk seen and frozen afterwards.
class TabularFeaturizer {
 public:
  TabularFeaturizer(const ExperimentConfig& config, const StreamData& data)
      : config_(config), data_(data), tfidf_(config.tfidf_features), pca_(config.pca) {
    if (config.featurizer == Featurizer::kMeanPool) table_.emplace(make_embeddings(config));
  }

  Matrix operator()(const TextView& view) {
    Matrix x = base(view);
    if (config_.pca > 0) {
      if (!pca_.fitted()) pca_.fit(x);
      x = pca_.transform(x);
    }
    return x;
  }

 private:
  Matrix base(const TextView& view) {
    switch (config_.featurizer) {
      case Featurizer::kMeanPool: {
        Matrix x(static_cast<Eigen::Index>(view.texts.size()), static_cast<Eigen::Index>(table_->dim()));
        for (std::size_t i = 0; i < view.texts.size(); ++i) {
          x.row(static_cast<Eigen::Index>(i)) = text::mean_pool(*table_, text::tokenize(view.texts[i])).transpose();
        }
        return x;
      }
      case Featurizer::kTfidf:
        if (!tfidf_.fitted()) tfidf_.fit(view.texts);
        return tfidf_.transform(view.texts);
      case Featurizer::kPrecomputed:
        return data_.vectors->middleRows(static_cast<Eigen::Index>(view.index * config_.chunk_size),
                                         static_cast<Eigen::Index>(view.texts.size()));
      case Featurizer::kSentenceSpace:
        break;
    }
    throw ConfigError("sentence_space is not a tabular featurizer");
  }

  const ExperimentConfig& config_;
  const StreamData& data_;
  std::optional<text::EmbeddingTable> table_;
  text::TfidfModel tfidf_;
  text::PcaModel pca_;
};

inline std::unique_ptr<ChunkClassifier<Matrix>> make_tabular_classifier(const ExperimentConfig& config) {
  baselines::EnsembleConfig ens{config.pool_cap, config.tree, config.seed};
  switch (config.method) {
    case Method::kHt: return std::make_unique<baselines::HoeffdingTreeClassifier>(config.tree);
    case Method::kGnb: return std::make_unique<baselines::GaussianNaiveBayes>(config.n_classes);
    case Method::kCds: return std::make_unique<baselines::LearnppCds>(ens, config.smote_k);
    case Method::kNie: return std::make_unique<baselines::LearnppNie>(ens);
    case Method::kKue: return std::make_unique<baselines::Kue>(ens);
    case Method::kOob:
      return std::make_unique<baselines::OnlineBagging>(
          ens, baselines::OnlineBaggingConfig{baselines::ResampleMode::kOversample, config.size_decay});
    case Method::kUob:
      return std::make_unique<baselines::OnlineBagging>(
          ens, baselines::OnlineBaggingConfig{baselines::ResampleMode::kUndersample, config.size_decay});
    case Method::kSss: break;
  }
  throw ConfigError("method sss has no tabular classifier");
}

/// Test-Then-Train over `chunks` with a freshly built classifier/featurizer.
inline std::vector<EvalRecord> evaluate(const ExperimentConfig& config, const StreamData& data,
                                        std::span<const TextChunk> chunks, const DriverHooks& hooks = {}) {
  if (config.method == Method::kSss) {
    const auto table = make_embeddings(config);
    SssClassifier classifier(config.cnn);
    const unsigned threads = config.deterministic ? 1 : std::max(1u, config.encoder_threads);
    return run_test_then_train<ImageChunk>(
        chunks, classifier, [&](const TextView& v) { return encode_view(table, v, config.encoder, threads); }, hooks);
  }
  auto classifier = make_tabular_classifier(config);
  TabularFeaturizer featurizer(config, data);
  return run_test_then_train<Matrix>(chunks, *classifier, featurizer, hooks);
}

inline const char* kMetricsHeader =
    "chunk,method,featurizer,tp,fn,fp,tn,bac,recall,specificity,precision,f1,gmean,gmean_s,prior_pos";

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<EvalRecord>& records, const std::string& method,
                              const std::string& featurizer) {
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    const auto& m = r.metrics;
    out << r.chunk << ',' << method << ',' << featurizer << ',' << r.confusion.tp << ',' << r.confusion.fn << ','
        << r.confusion.fp << ',' << r.confusion.tn;
    for (double v : {m.bac, m.recall, m.specificity, m.precision, m.f1, m.gmean, m.gmean_s, r.prior_pos}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

/// Same columns with every metric series replaced by its centered moving average.
inline void write_smoothed_csv(std::ostream& out, const std::vector<EvalRecord>& records, int window) {
  std::vector<std::vector<double>> cols(7);
  for (const auto& r : records) {
    const auto& m = r.metrics;
    const double vals[7] = {m.bac, m.recall, m.specificity, m.precision, m.f1, m.gmean, m.gmean_s};
    for (int c = 0; c < 7; ++c) cols[c].push_back(vals[c]);
  }
  for (auto& c : cols) c = smooth(c, window);
  out << "chunk,bac,recall,specificity,precision,f1,gmean,gmean_s\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << records[i].chunk;
    for (const auto& c : cols) out << ',' << format_double(c[i]);
    out << '\n';
  }
}

/// Parsed metrics CSV row, for round-trip checks and downstream tooling.
struct MetricsCsvRow {
  std::size_t chunk = 0;
  std::string method, featurizer;
  ConfusionMatrix confusion;
  MetricRow metrics;
  double prior_pos = 0;
};

inline std::vector<MetricsCsvRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError("unexpected metrics CSV header");
  std::vector<MetricsCsvRow> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 15) throw FormatError("metrics CSV row has " + std::to_string(f.size()) + " fields", line_no);
    MetricsCsvRow r;
    r.chunk = std::stoull(f[0]);
    r.method = f[1];
    r.featurizer = f[2];
    r.confusion = {std::stoll(f[3]), std::stoll(f[4]), std::stoll(f[5]), std::stoll(f[6])};
    double* dst[8] = {&r.metrics.bac, &r.metrics.recall, &r.metrics.specificity, &r.metrics.precision,
                      &r.metrics.f1,  &r.metrics.gmean,  &r.metrics.gmean_s,     &r.prior_pos};
    for (int i = 0; i < 8; ++i) *dst[i] = std::strtod(f[7 + i].c_str(), nullptr);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<EvalRecord> run_experiment(const ExperimentConfig& config, std::ostream& csv) {
  config.validate();
  const StreamData data = load_stream(config);
  const auto records = evaluate(config, data, data.chunks);
  write_metrics_csv(csv, records, to_string(config.method), to_string(config.featurizer));
  return records;
}

struct TimingRecord {
  std::size_t repeat = 0;
  std::size_t chunk = 0;
  PhaseTimes times;
};

inline constexpr const char* kPhases[3] = {"extract", "predict", "train"};

inline double phase_seconds(const PhaseTimes& t, int phase) {
  return phase == 0 ? t.extract_seconds : phase == 1 ? t.predict_seconds : t.train_seconds;
}

/// Times the first n_chunks chunks `repeats` times, each repeat with a fresh
/// model. Chunks before `warmup` are processed but not recorded.
inline std::vector<TimingRecord> run_bench(const ExperimentConfig& config) {
  config.validate();
  if (config.bench_warmup < 1) throw ConfigError("bench.warmup must be >= 1 (chunk 0 is train-only)");
  if (config.bench_warmup >= config.bench_chunks) throw ConfigError("bench.warmup must be < bench.n_chunks");
  ExperimentConfig cfg = config;
  cfg.deterministic = true;  // no encoding threads while timing
  const StreamData data = load_stream(cfg);
  if (data.chunks.size() < cfg.bench_chunks) {
    throw ConfigError("stream has " + std::to_string(data.chunks.size()) + " chunks, bench needs " +
                      std::to_string(cfg.bench_chunks) + " (short by " +
                      std::to_string(cfg.bench_chunks - data.chunks.size()) + ")");
  }
  std::span<const TextChunk> head(data.chunks.data(), cfg.bench_chunks);
  std::vector<TimingRecord> out;
  for (std::size_t rep = 0; rep < cfg.bench_repeats; ++rep) {
    for (const auto& r : evaluate(cfg, data, head)) {
      if (r.chunk >= cfg.bench_warmup) out.push_back({rep, r.chunk, r.times});
    }
  }
  return out;
}

struct TimingSummaryRow {
  int phase = 0;
  std::size_t chunk = 0;
  double mean_seconds = 0;
  double accumulated_seconds = 0;
};

/// Per phase and chunk: mean over repeats and its running sum over chunks.
inline std::vector<TimingSummaryRow> summarize_timing(const std::vector<TimingRecord>& records) {
  std::map<std::size_t, std::array<double, 3>> sums;
  std::map<std::size_t, std::size_t> counts;
  for (const auto& r : records) {
    auto& s = sums[r.chunk];
    for (int p = 0; p < 3; ++p) s[p] += phase_seconds(r.times, p);
    ++counts[r.chunk];
  }
  std::vector<TimingSummaryRow> rows;
  for (int p = 0; p < 3; ++p) {
    double acc = 0;
    for (const auto& [chunk, s] : sums) {
      const double mean = s[p] / static_cast<double>(counts[chunk]);
      acc += mean;
      rows.push_back({p, chunk, mean, acc});
    }
  }
  return rows;
}

inline void write_timing_csv(std::ostream& out, const std::vector<TimingRecord>& records) {
  out << "repeat,chunk,phase,seconds\n";
  for (const auto& r : records) {
    for (int p = 0; p < 3; ++p) {
      out << r.repeat << ',' << r.chunk << ',' << kPhases[p] << ',' << format_double(phase_seconds(r.times, p)) << '\n';
    }
  }
  out << "#summary,phase,chunk,mean_seconds,accumulated_seconds\n";
  for (const auto& s : summarize_timing(records)) {
    out << "#summary," << kPhases[s.phase] << ',' << s.chunk << ',' << format_double(s.mean_seconds) << ','
        << format_double(s.accumulated_seconds) << '\n';
  }
}

inline Image encode_debug(const ExperimentConfig& config, const std::string& text) {
  const auto table = make_embeddings(config);
  return encode_text(table, text, config.encoder);
}

}  // namespace sss::bench
