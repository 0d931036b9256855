// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "sss/baselines/hoeffding_tree.hpp"
#include "sss/baselines/kue.hpp"
#include "sss/baselines/learnpp.hpp"
#include "sss/baselines/online_bagging.hpp"
#include "sss/baselines/smote.hpp"
#include "sss/bench/config.hpp"
#include "sss/bench/experiment.hpp"
#include "sss/cnn/gradient_check.hpp"
#include "sss/cnn/resnet.hpp"
#include "sss/metrics.hpp"
#include "sss/sentence_space.hpp"
#include "sss/stream.hpp"

namespace fs = std::filesystem;
using namespace sss;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  if (!out.pass) ++failures;
  std::cout << (out.pass ? "PASS " : "FAIL ") << name << ": " << out.detail << " [" << fmt("%.1f", seconds_since(t0))
            << " s]" << std::endl;
}

bench::ExperimentConfig config_from(const std::map<std::string, std::string>& values) {
  bench::KeyValues kv;
  for (const auto& [k, v] : values) kv.set(k, v);
  return bench::ExperimentConfig::from(kv);
}

double mean_bac(const std::vector<EvalRecord>& records, std::size_t first, std::size_t last) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.chunk >= first && r.chunk <= last) sum += r.metrics.bac, ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SSS_CLI_PATH) + " " + args + " 2>/dev/null";
  return std::system(cmd.c_str());
}

// Shared encoder settings for the CNN criteria; see README for why the
// acceptance stream uses a narrow embedding.
constexpr const char* kSssDim = "16";
constexpr const char* kSssHeight = "32";

Outcome full_scale_chunking() {
  constexpr std::size_t n = 682'996;
  std::vector<Sample> samples(n);
  for (std::size_t i = 0; i < n; ++i) samples[i] = {"s" + std::to_string(i), static_cast<int>(i % 7 == 0)};
  const auto t0 = Clock::now();
  const auto chunks = chunk_stream(samples, StreamConfig{});
  const double secs = seconds_since(t0);
  bool sizes = true;
  for (const auto& c : chunks) sizes = sizes && c.size() == 250;
  const bool last_ok = !chunks.empty() && chunks.back().texts.back() == "s" + std::to_string(2731 * 250 - 1);
  return {chunks.size() == 2731 && sizes && last_ok && secs < 30,
          std::to_string(chunks.size()) + " chunks of 250, remainder " + std::to_string(n - chunks.size() * 250) +
              " dropped, " + fmt("%.2f", secs) + " s"};
}

Outcome resize_goldens() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 60), height(1, 80);
  std::uniform_real_distribution<double> val(-3, 3);
  double worst = 0;
  int cases = 0, l1 = 0, same = 0, up = 0, down = 0;
  auto check = [&](int rows, int h) {
    Eigen::MatrixXd x(rows, 3);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = val(rng);
    const auto y = bilinear_resize_height(x, static_cast<std::size_t>(h));
    for (int c = 0; c < 3; ++c) {
      std::vector<double> col(static_cast<std::size_t>(rows));
      for (int r = 0; r < rows; ++r) col[static_cast<std::size_t>(r)] = x(r, c);
      const auto ref = oracle::resize_column(col, h);
      for (int r = 0; r < h; ++r) worst = std::max(worst, std::abs(y(r, c) - ref[static_cast<std::size_t>(r)]));
    }
    ++cases;
    l1 += rows == 1;
    same += rows == h;
    up += h > rows;
    down += h < rows;
  };
  for (int i = 0; i < 10; ++i) check(1, height(rng));
  for (int i = 0; i < 10; ++i) {
    const int r = len(rng);
    check(r, r);
  }
  for (int i = 0; i < 130; ++i) check(len(rng), height(rng));

  Eigen::MatrixXd v(2, 1);
  v << 0, 1;
  const auto g = bilinear_resize_height(v, 4);
  const bool golden = g(0, 0) == 0.0 && g(1, 0) == 0.25 && g(2, 0) == 0.75 && g(3, 0) == 1.0;

  const auto table = text::EmbeddingTable::hash_random(300, 1);
  const Image img = encode_text(table, "a short sentence about streams", EncoderConfig{});
  const bool shape = img.rows() == 200 && img.cols() == 300;
  return {worst <= 1e-12 && golden && shape && l1 > 0 && same > 0 && up > 0 && down > 0,
          std::to_string(cases) + " cases (L=1: " + std::to_string(l1) + ", L=H: " + std::to_string(same) +
              ", up: " + std::to_string(up) + ", down: " + std::to_string(down) + "), max err " + fmt("%.2e", worst) +
              ", [0,1]->[0,.25,.75,1] " + (golden ? "exact" : "WRONG") + ", default image " +
              std::to_string(img.rows()) + "x" + std::to_string(img.cols())};
}

Outcome cnn_gradient_check() {
  const auto t0 = Clock::now();
  const auto r = cnn::gradient_check(cnn::CnnConfig::tiny(), 8, 12);
  const double secs = seconds_since(t0);
  return {r.max_relative_error < 1e-4 && secs < 60 && r.checked > 0,
          "max relative error " + fmt("%.2e", r.max_relative_error) + " at " + r.worst_parameter + " over " +
              std::to_string(r.checked) + " parameters, " + fmt("%.1f", secs) + " s"};
}

Outcome overfit_singleton() {
  const auto table = text::EmbeddingTable::hash_random(std::stoul(kSssDim), 3);
  EncoderConfig enc;
  enc.target_height = std::stoul(kSssHeight);
  const Image one = encode_text(table, "c1w4 c1w17 c1w3 c0w9 c1w40 c1w22 c1w8", enc);
  const std::vector<Image> images(200, one);
  const Labels labels(200, 1);
  cnn::ResNet<float> net(cnn::CnnConfig::tiny());
  double final_loss = 0;
  for (int epoch = 0; epoch < 30; ++epoch) {
    const auto losses = net.train_one_epoch(images, labels);
    final_loss = 0;
    for (double l : losses) final_loss += l;
    final_loss /= static_cast<double>(losses.size());
  }
  return {final_loss < 0.05, "mean loss in epoch 30 = " + fmt("%.4g", final_loss)};
}

Outcome sss_end_to_end() {
  const auto cfg = config_from({{"method", "sss"},
                                {"cnn.preset", "tiny"},
                                {"embeddings.dim", kSssDim},
                                {"encoder.height", kSssHeight},
                                {"seed", "1"}});
  const auto t0 = Clock::now();
  std::ostringstream csv;
  const auto records = bench::run_experiment(cfg, csv);
  const double secs = seconds_since(t0);
  const double late = mean_bac(records, 50, 99);
  const double pre = mean_bac(records, 55, 74);
  const double post = mean_bac(records, 80, 99);
  return {records.size() == 99 && late >= 0.75 && post >= pre - 0.05 && secs < 600,
          "mean BAC chunks 50-99 " + fmt("%.3f", late) + ", pre-drift 55-74 " + fmt("%.3f", pre) +
              ", post-drift 80-99 " + fmt("%.3f", post) + ", " + fmt("%.0f", secs) + " s"};
}

// Forwards to a tabular classifier and records its pool size after every fit.
class PoolWatch : public ChunkClassifier<Matrix> {
 public:
  PoolWatch(std::unique_ptr<ChunkClassifier<Matrix>> inner, std::function<std::size_t()> size_of)
      : inner_(std::move(inner)), size_of_(std::move(size_of)) {}
  Labels predict(const Matrix& x) override { return inner_->predict(x); }
  void partial_fit(const Matrix& x, std::span<const int> y) override {
    inner_->partial_fit(x, y);
    max_pool_ = std::max(max_pool_, size_of_());
  }
  ChunkClassifier<Matrix>* inner() { return inner_.get(); }
  std::size_t max_pool() const { return max_pool_; }

 private:
  std::unique_ptr<ChunkClassifier<Matrix>> inner_;
  std::function<std::size_t()> size_of_;
  std::size_t max_pool_ = 0;
};

Outcome baseline_sanity() {
  std::string detail;
  bool pass = true;

  // Stationary two-Gaussian stream: feature 0 at -2 / +2, four noise features.
  {
    baselines::HoeffdingTreeClassifier ht;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    std::bernoulli_distribution pos(0.5);
    double worst = 1;
    for (int k = 0; k < 30; ++k) {
      Matrix x(250, 5);
      Labels y(250);
      for (int i = 0; i < 250; ++i) {
        y[i] = pos(rng);
        for (int j = 0; j < 5; ++j) x(i, j) = g(rng);
        x(i, 0) += y[i] ? 2.0 : -2.0;
      }
      if (k >= 20) worst = std::min(worst, compute_metrics(ConfusionMatrix::from_predictions(y, ht.predict(x))).bac);
      ht.partial_fit(x, y);
    }
    pass = pass && worst >= 0.9;
    detail += "ht min BAC chunks 20-29 " + fmt("%.3f", worst);
  }

  for (const std::string method : {"cds", "nie", "kue", "oob", "uob"}) {
    const auto cfg = config_from({{"method", method},
                                  {"featurizer", "mean_pool"},
                                  {"embeddings.dim", "32"},
                                  {"ht.leaf_prediction", "naive_bayes"},
                                  {"seed", "5"}});
    const auto data = bench::load_stream(cfg);
    auto inner = bench::make_tabular_classifier(cfg);
    ChunkClassifier<Matrix>* raw = inner.get();
    std::function<std::size_t()> size_of;
    if (auto* p = dynamic_cast<baselines::LearnppBase*>(raw)) size_of = [p] { return p->pool_size(); };
    if (auto* p = dynamic_cast<baselines::Kue*>(raw)) size_of = [p] { return p->pool_size(); };
    if (auto* p = dynamic_cast<baselines::OnlineBagging*>(raw)) size_of = [p] { return p->pool_size(); };
    if (!size_of) return {false, method + " has no pool"};
    PoolWatch watch(std::move(inner), size_of);
    bench::TabularFeaturizer featurize(cfg, data);
    const auto records = run_test_then_train<Matrix>(data.chunks, watch, featurize);
    const double bac = mean_bac(records, 50, 99);
    pass = pass && watch.max_pool() <= 10 && bac > 0.5;
    detail += "; " + method + " max pool " + std::to_string(watch.max_pool()) + ", BAC 50-99 " + fmt("%.3f", bac);
  }
  return {pass, detail};
}

Outcome metric_oracle() {
  const std::vector<ConfusionMatrix> cases{
      {40, 10, 20, 30}, {0, 0, 0, 0},   {5, 0, 0, 0},   {0, 5, 0, 0},   {0, 0, 5, 0},     {0, 0, 0, 5},  {3, 0, 0, 7},
      {0, 3, 7, 0},     {1, 1, 1, 1},   {7, 0, 3, 0},   {0, 7, 0, 3},   {1, 2, 3, 4},     {13, 7, 11, 219},
      {250, 0, 0, 0},   {1, 0, 0, 249}, {0, 1, 249, 0}, {17, 3, 29, 1}, {99, 101, 97, 103}, {2, 5, 0, 0},
      {0, 0, 6, 9}};
  int exact = 0;
  for (const auto& cm : cases) {
    const auto ref = oracle::metrics(cm.tp, cm.fn, cm.fp, cm.tn);
    const MetricRow m = compute_metrics(cm);
    exact += m.recall == ref.recall.value() && m.specificity == ref.specificity.value() &&
             m.precision == ref.precision.value() && m.bac == ref.bac.value() && m.f1 == ref.f1.value() &&
             m.gmean == std::sqrt(ref.gmean_sq.value()) && m.gmean_s == std::sqrt(ref.gmean_s_sq.value());
  }
  return {exact == static_cast<int>(cases.size()),
          std::to_string(exact) + "/" + std::to_string(cases.size()) + " matrices match the rational oracle exactly"};
}

double distance_to_segment(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const Eigen::RowVectorXd ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 == 0 ? 0.0 : std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

Outcome smote_properties() {
  std::mt19937_64 data_rng(21);
  std::normal_distribution<double> g;
  Matrix x(120, 4);
  Labels y(120, 0);
  for (int i = 0; i < 120; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = g(data_rng);
    if (i % 8 == 0) y[i] = 1, x.row(i).array() += 3.0;
  }
  Matrix minority(15, 4);
  for (int i = 0, m = 0; i < 120; ++i) {
    if (y[i] == 1) minority.row(m++) = x.row(i);
  }

  std::mt19937_64 rng(9);
  const auto out = baselines::smote_balance(x, y, 2, 5, rng);
  std::mt19937_64 rng2(9);
  const auto again = baselines::smote_balance(x, y, 2, 5, rng2);

  std::size_t pos = 0, neg = 0;
  double worst = 0;
  for (Eigen::Index i = 0; i < out.x.rows(); ++i) {
    if (out.y[static_cast<std::size_t>(i)] == 1) {
      ++pos;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index a = 0; a < minority.rows(); ++a) {
        for (Eigen::Index b = a; b < minority.rows(); ++b) {
          best = std::min(best, distance_to_segment(out.x.row(i), minority.row(a), minority.row(b)));
        }
      }
      worst = std::max(worst, best);
    } else {
      ++neg;
    }
  }
  const bool same = out.x == again.x && out.y == again.y;
  return {worst <= 1e-9 && pos == neg && pos == 105 && same,
          "counts " + std::to_string(neg) + "/" + std::to_string(pos) + ", max distance to a minority segment " +
              fmt("%.1e", worst) + ", seeded rerun " + (same ? "identical" : "DIFFERENT")};
}

Outcome bench_regime(const fs::path& dir) {
  const fs::path conf = dir / "bench.conf";
  std::ofstream(conf) << "method = ht\nfeaturizer = mean_pool\nembeddings.dim = 16\nsynth.n_chunks = 110\n"
                         "bench.n_chunks = 110\nbench.warmup = 10\nbench.repeats = 10\n";
  const fs::path csv = dir / "timing.csv";
  if (run_cli("bench --config " + conf.string() + " --out " + csv.string()) != 0) return {false, "sss bench failed"};

  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::size_t records = 0;
  std::map<std::string, std::map<std::size_t, std::vector<double>>> seconds;  // phase -> chunk -> per repeat
  std::map<std::string, std::vector<std::pair<double, double>>> summary;       // phase -> (mean, accumulated)
  std::set<std::tuple<std::size_t, std::size_t, std::string>> keys;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() == 5 && f[0] == "#summary" && f[1] == "phase") continue;  // summary header
    if (f.size() == 5 && f[0] == "#summary") {
      summary[f[1]].emplace_back(std::stod(f[3]), std::stod(f[4]));
    } else if (f.size() == 4 && f[0] != "#summary") {
      ++records;
      keys.emplace(std::stoul(f[0]), std::stoul(f[1]), f[2]);
      seconds[f[2]][std::stoul(f[1])].push_back(std::stod(f[3]));
    }
  }
  const bool layout = records == 3000 && keys.size() == 3000 && seconds.size() == 3 &&
                      seconds.begin()->second.size() == 100 && seconds.begin()->second.begin()->first == 10;

  bool monotone = true, sums = true;
  for (const auto& [phase, rows] : summary) {
    double prev = 0, acc = 0;
    const auto& per_chunk = seconds[phase];
    if (rows.size() != per_chunk.size()) sums = false;
    auto it = per_chunk.begin();
    for (const auto& [mean, accumulated] : rows) {
      monotone = monotone && accumulated >= prev;
      prev = accumulated;
      if (it == per_chunk.end()) break;
      double s = 0;
      for (double v : it->second) s += v;
      acc += s / static_cast<double>(it->second.size());
      ++it;
      sums = sums && std::abs(accumulated - acc) <= 1e-9 * std::max(std::abs(acc), 1e-300);
    }
  }
  return {layout && monotone && sums && summary.size() == 3,
          std::to_string(records) + " records (" + std::to_string(keys.size()) +
              " distinct repeat/chunk/phase), accumulated totals " + (monotone ? "non-decreasing" : "DECREASING") +
              ", " + (sums ? "equal" : "NOT equal") + " to recomputed sums"};
}

Outcome cli_determinism(const fs::path& dir) {
  const std::vector<std::pair<std::string, std::string>> runs{
      {"ht", "--set method=ht --set featurizer=mean_pool --set embeddings.dim=16"},
      {"cds", "--set method=cds --set featurizer=tfidf --set pca=10 --set synth.n_chunks=30"},
      {"nie", "--set method=nie --set featurizer=mean_pool --set embeddings.dim=16 --set synth.n_chunks=30"},
      {"kue", "--set method=kue --set featurizer=tfidf --set synth.n_chunks=30"},
      {"uob", "--set method=uob --set featurizer=mean_pool --set embeddings.dim=16 --set synth.n_chunks=30"},
      {"sss", "--set method=sss --set cnn.preset=tiny --set embeddings.dim=8 --set encoder.height=16 "
              "--set synth.n_chunks=6"},
  };
  std::string detail;
  bool pass = true;
  for (const auto& [name, args] : runs) {
    const fs::path a = dir / (name + "_a.csv"), b = dir / (name + "_b.csv");
    const int ra = run_cli("run --seed 3 " + args + " --out " + a.string());
    const int rb = run_cli("run --seed 3 " + args + " --out " + b.string());
    const std::string ca = slurp(a), cb = slurp(b);
    const bool same = ra == 0 && rb == 0 && !ca.empty() && ca == cb;
    pass = pass && same;
    detail += (detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERENT");
  }
  return {pass, detail + " (" + std::to_string(runs.size()) + " methods, run twice each)"};
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / ("sss_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  criterion("full-scale chunking", full_scale_chunking);
  criterion("encoding goldens", resize_goldens);
  criterion("CNN gradient check", cnn_gradient_check);
  criterion("overfit sanity", overfit_singleton);
  criterion("end-to-end drift experiment", sss_end_to_end);
  criterion("baseline sanity", baseline_sanity);
  criterion("metric oracle equivalence", metric_oracle);
  criterion("SMOTE properties", smote_properties);
  criterion("bench harness regime", [&] { return bench_regime(dir); });
  criterion("determinism", [&] { return cli_determinism(dir); });

  fs::remove_all(dir);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
