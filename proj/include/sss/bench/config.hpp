#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sss/baselines/hoeffding_tree.hpp"
#include "sss/cnn/resnet.hpp"
#include "sss/error.hpp"
#include "sss/ingest.hpp"
#include "sss/sentence_space.hpp"
#include "sss/text/embedding.hpp"

namespace sss::bench {

/// Flat `key = value` settings. Blank lines and `#` comments are ignored;
/// a later assignment overrides an earlier one.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& origin = "<config>") {
    KeyValues kv;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw FormatError(origin + ": expected 'key = value'", line_no);
      const std::string key = trim(body.substr(0, eq));
      if (key.empty()) throw FormatError(origin + ": empty key", line_no);
      kv.values_[key] = trim(body.substr(eq + 1));
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  template <class T>
  T get_number(const std::string& key, T fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    T v{};
    if (!text::detail::parse_number(it->second, v)) {
      throw ConfigError("config key '" + key + "' expects a number, got '" + it->second + "'");
    }
    return v;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError("config key '" + key + "' expects true/false, got '" + it->second + "'");
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

 private:
  std::map<std::string, std::string> values_;
};

enum class Source { kSynth, kTsv, kVectors };
enum class Method { kSss, kHt, kGnb, kCds, kNie, kKue, kOob, kUob };
enum class Featurizer { kSentenceSpace, kMeanPool, kTfidf, kPrecomputed };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kSss: return "sss";
    case Method::kHt: return "ht";
    case Method::kGnb: return "gnb";
    case Method::kCds: return "cds";
    case Method::kNie: return "nie";
    case Method::kKue: return "kue";
    case Method::kOob: return "oob";
    case Method::kUob: return "uob";
  }
  return "?";
}

inline std::string to_string(Featurizer f) {
  switch (f) {
    case Featurizer::kSentenceSpace: return "sentence_space";
    case Featurizer::kMeanPool: return "mean_pool";
    case Featurizer::kTfidf: return "tfidf";
    case Featurizer::kPrecomputed: return "precomputed";
  }
  return "?";
}

/// Every recognized configuration key with its default. README lists the same set.
inline const std::map<std::string, std::string>& known_keys() {
  static const std::map<std::string, std::string> keys{
      {"source", "synth"},
      {"seed", "0"},
      {"chunk_size", "250"},
      {"n_classes", "2"},
      {"max_chunks", "0"},
      {"out", ""},
      {"deterministic", "true"},
      {"smooth_window", "1"},
      {"method", "sss"},
      {"featurizer", "sentence_space"},
      {"pca", "0"},
      {"tsv.path", ""},
      {"tsv.text_column", "clean_title"},
      {"tsv.label_column", "2_way_label"},
      {"tsv.timestamp_column", "created_utc"},
      {"tsv.filter_column", ""},
      {"tsv.filter_value", ""},
      {"synth.n_chunks", "100"},
      {"synth.vocab_per_class", "50"},
      {"synth.min_words", "3"},
      {"synth.max_words", "50"},
      {"synth.prior_schedule", "0:0.2,0.75:0.5,1:0.8"},
      {"synth.noise_rate", "0.1"},
      {"vectors.path", ""},
      {"vectors.labels", ""},
      {"embeddings", "hash-random"},
      {"embeddings.dim", "300"},
      {"encoder.height", "200"},
      {"encoder.row_cap", "400"},
      {"encoder.normalize", "none"},
      {"encoder.threads", "1"},
      {"cnn.preset", "resnet18"},
      {"cnn.lr", "0.001"},
      {"cnn.momentum", "0.9"},
      {"cnn.batch_size", "8"},
      {"tfidf.max_features", "100"},
      {"ht.grace_period", "200"},
      {"ht.delta", "1e-7"},
      {"ht.tie_tau", "0.05"},
      {"ht.leaf_prediction", "majority"},
      {"ht.candidate_thresholds", "10"},
      {"pool_cap", "10"},
      {"smote.k", "5"},
      {"bagging.size_decay", "0.9"},
      {"bench.n_chunks", "110"},
      {"bench.warmup", "10"},
      {"bench.repeats", "10"},
      {"encode.text", ""},
  };
  return keys;
}

struct ExperimentConfig {
  Source source = Source::kSynth;
  std::uint64_t seed = 0;
  std::size_t chunk_size = 250;
  int n_classes = 2;
  std::size_t max_chunks = 0;  // 0 = all
  std::string out;
  bool deterministic = true;
  int smooth_window = 1;

  Method method = Method::kSss;
  Featurizer featurizer = Featurizer::kSentenceSpace;
  Eigen::Index pca = 0;  // 0 = no projection

  std::string tsv_path;
  ingest::TsvSchema schema;
  ingest::SynthConfig synth;
  std::string vectors_path;
  std::string labels_path;

  std::string embeddings = "hash-random";
  std::size_t embedding_dim = 300;
  EncoderConfig encoder;
  unsigned encoder_threads = 1;
  cnn::CnnConfig cnn = cnn::CnnConfig::resnet18();
  std::size_t tfidf_features = 100;
  baselines::HoeffdingTreeConfig tree;
  std::size_t pool_cap = 10;
  int smote_k = 5;
  double size_decay = 0.9;

  std::size_t bench_chunks = 110;
  std::size_t bench_warmup = 10;
  std::size_t bench_repeats = 10;
  std::string encode_text;

  /// Cross-field checks; run before any work starts.
  void validate() const {
    if (chunk_size < 2) throw ConfigError("chunk_size must be >= 2");
    if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
    const bool images = featurizer == Featurizer::kSentenceSpace;
    if ((method == Method::kSss) != images) {
      throw ConfigError("method '" + to_string(method) + "' is incompatible with featurizer '" + to_string(featurizer) +
                        "' (sss requires sentence_space and vice versa)");
    }
    if ((featurizer == Featurizer::kPrecomputed) != (source == Source::kVectors)) {
      throw ConfigError("featurizer 'precomputed' requires source = vectors and vice versa");
    }
    if ((method == Method::kOob || method == Method::kUob) && n_classes != 2) {
      throw ConfigError("oob/uob support binary labels only");
    }
    if (source == Source::kTsv && tsv_path.empty()) throw ConfigError("source = tsv requires tsv.path");
    if (source == Source::kVectors && (vectors_path.empty() || labels_path.empty())) {
      throw ConfigError("source = vectors requires vectors.path and vectors.labels");
    }
    if (smooth_window < 1 || smooth_window % 2 == 0) throw ConfigError("smooth_window must be odd and >= 1");
    if (pca < 0) throw ConfigError("pca must be >= 0");
    encoder.validate();
    cnn.validate();
    tree.validate();
  }

  static std::vector<std::pair<double, double>> parse_schedule(const std::string& s) {
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = KeyValues::trim(item);
      const auto colon = item.find(':');
      double f = 0, p = 0;
      if (colon == std::string::npos || !text::detail::parse_number(KeyValues::trim(item.substr(0, colon)), f) ||
          !text::detail::parse_number(KeyValues::trim(item.substr(colon + 1)), p)) {
        throw ConfigError("synth.prior_schedule entries must be 'fraction:prior', got '" + item + "'");
      }
      out.emplace_back(f, p);
    }
    return out;
  }

  static ExperimentConfig from(const KeyValues& kv) {
    for (const auto& [key, value] : kv.values()) {
      if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    ExperimentConfig c;
    const std::string source = kv.get("source", "synth");
    if (source == "synth") c.source = Source::kSynth;
    else if (source == "tsv") c.source = Source::kTsv;
    else if (source == "vectors") c.source = Source::kVectors;
    else throw ConfigError("source must be synth, tsv or vectors, got '" + source + "'");

    c.seed = kv.get_number<std::uint64_t>("seed", 0);
    c.chunk_size = kv.get_number<std::size_t>("chunk_size", 250);
    c.n_classes = kv.get_number<int>("n_classes", 2);
    c.max_chunks = kv.get_number<std::size_t>("max_chunks", 0);
    c.out = kv.get("out", "");
    c.deterministic = kv.get_bool("deterministic", true);
    c.smooth_window = kv.get_number<int>("smooth_window", 1);

    static const std::map<std::string, Method> methods{{"sss", Method::kSss}, {"ht", Method::kHt},
                                                       {"gnb", Method::kGnb}, {"cds", Method::kCds},
                                                       {"nie", Method::kNie}, {"kue", Method::kKue},
                                                       {"oob", Method::kOob}, {"uob", Method::kUob}};
    const std::string method = kv.get("method", "sss");
    if (!methods.count(method)) throw ConfigError("unknown method '" + method + "'");
    c.method = methods.at(method);

    static const std::map<std::string, Featurizer> featurizers{{"sentence_space", Featurizer::kSentenceSpace},
                                                               {"mean_pool", Featurizer::kMeanPool},
                                                               {"tfidf", Featurizer::kTfidf},
                                                               {"precomputed", Featurizer::kPrecomputed}};
    const std::string feat = kv.get("featurizer", "sentence_space");
    if (!featurizers.count(feat)) throw ConfigError("unknown featurizer '" + feat + "'");
    c.featurizer = featurizers.at(feat);
    c.pca = kv.get_number<Eigen::Index>("pca", 0);

    c.tsv_path = kv.get("tsv.path", "");
    c.schema.text_column = kv.get("tsv.text_column", c.schema.text_column);
    c.schema.label_column = kv.get("tsv.label_column", c.schema.label_column);
    c.schema.timestamp_column = kv.get("tsv.timestamp_column", c.schema.timestamp_column);
    if (kv.has("tsv.filter_column")) {
      c.schema.filter = std::make_pair(kv.get("tsv.filter_column", ""), kv.get("tsv.filter_value", ""));
    }
    c.schema.n_classes = c.n_classes;

    c.synth.n_chunks = kv.get_number<std::size_t>("synth.n_chunks", 100);
    c.synth.chunk_size = c.chunk_size;
    c.synth.vocab_per_class = kv.get_number<std::size_t>("synth.vocab_per_class", 50);
    c.synth.min_words = kv.get_number<std::size_t>("synth.min_words", 3);
    c.synth.max_words = kv.get_number<std::size_t>("synth.max_words", 50);
    c.synth.prior_schedule = parse_schedule(kv.get("synth.prior_schedule", "0:0.2,0.75:0.5,1:0.8"));
    c.synth.noise_rate = kv.get_number<double>("synth.noise_rate", 0.1);
    c.synth.seed = c.seed;

    c.vectors_path = kv.get("vectors.path", "");
    c.labels_path = kv.get("vectors.labels", "");

    c.embeddings = kv.get("embeddings", "hash-random");
    c.embedding_dim = kv.get_number<std::size_t>("embeddings.dim", 300);
    c.encoder.target_height = kv.get_number<std::size_t>("encoder.height", 200);
    c.encoder.row_cap = kv.get_number<std::size_t>("encoder.row_cap", 400);
    const std::string norm = kv.get("encoder.normalize", "none");
    if (norm == "none") c.encoder.normalize = Normalize::kNone;
    else if (norm == "standardize") c.encoder.normalize = Normalize::kStandardize;
    else throw ConfigError("encoder.normalize must be none or standardize");
    c.encoder_threads = kv.get_number<unsigned>("encoder.threads", 1);

    c.cnn = cnn::CnnConfig::preset(kv.get("cnn.preset", "resnet18"));
    c.cnn.lr = kv.get_number<double>("cnn.lr", 0.001);
    c.cnn.momentum = kv.get_number<double>("cnn.momentum", 0.9);
    c.cnn.batch_size = kv.get_number<std::size_t>("cnn.batch_size", 8);
    c.cnn.n_classes = c.n_classes;
    c.cnn.seed = c.seed;

    c.tfidf_features = kv.get_number<std::size_t>("tfidf.max_features", 100);
    c.tree.grace_period = kv.get_number<double>("ht.grace_period", 200);
    c.tree.delta = kv.get_number<double>("ht.delta", 1e-7);
    c.tree.tie_tau = kv.get_number<double>("ht.tie_tau", 0.05);
    const std::string leaf = kv.get("ht.leaf_prediction", "majority");
    if (leaf == "majority") c.tree.leaf_prediction = baselines::LeafPrediction::kMajorityClass;
    else if (leaf == "naive_bayes") c.tree.leaf_prediction = baselines::LeafPrediction::kNaiveBayes;
    else throw ConfigError("ht.leaf_prediction must be majority or naive_bayes");
    c.tree.candidate_thresholds = kv.get_number<int>("ht.candidate_thresholds", 10);
    c.tree.n_classes = c.n_classes;
    c.pool_cap = kv.get_number<std::size_t>("pool_cap", 10);
    c.smote_k = kv.get_number<int>("smote.k", 5);
    c.size_decay = kv.get_number<double>("bagging.size_decay", 0.9);

    c.bench_chunks = kv.get_number<std::size_t>("bench.n_chunks", 110);
    c.bench_warmup = kv.get_number<std::size_t>("bench.warmup", 10);
    c.bench_repeats = kv.get_number<std::size_t>("bench.repeats", 10);
    c.encode_text = kv.get("encode.text", "");
    return c;
  }
};

}  // namespace sss::bench
