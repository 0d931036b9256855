// Command-line front end: synth | run | bench | encode.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "sss/bench/config.hpp"
#include "sss/bench/experiment.hpp"
#include "sss/ingest.hpp"
#include "sss/sentence_space.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "key = value configuration file");
  cmd->add_option("--seed", opts.seed, "override the configured seed");
  cmd->add_option("--out", opts.out, "output path (default: stdout, or the 'out' key)");
  cmd->add_option("--set", opts.overrides, "extra key=value override (repeatable)");
}

sss::bench::ExperimentConfig resolve(const CommonOptions& opts) {
  sss::bench::KeyValues kv;
  if (!opts.config_path.empty()) kv = sss::bench::KeyValues::load(opts.config_path);
  for (const auto& o : opts.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw sss::ConfigError("--set expects key=value, got '" + o + "'");
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  if (opts.seed) kv.set("seed", std::to_string(*opts.seed));
  if (!opts.out.empty()) kv.set("out", opts.out);
  return sss::bench::ExperimentConfig::from(kv);
}

// Writes through `fn` to cfg.out, or stdout when unset.
template <class F>
void with_output(const std::string& path, bool binary, F&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  fn(out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming sentence-space text classification toolkit"};
  app.require_subcommand(1);

  CommonOptions synth_opts, run_opts, bench_opts, encode_opts;
  auto* synth = app.add_subcommand("synth", "write a synthetic drifting stream as TSV");
  add_common(synth, synth_opts);
  auto* run = app.add_subcommand("run", "Test-Then-Train evaluation, metrics CSV");
  add_common(run, run_opts);
  auto* bench = app.add_subcommand("bench", "per-phase timing harness, timing CSV");
  add_common(bench, bench_opts);
  auto* encode = app.add_subcommand("encode", "encode one text as an ASCII PGM image");
  add_common(encode, encode_opts);
  std::string encode_text;
  bool encode_text_set = false;
  encode->add_option("--text", encode_text, "text to encode (overrides encode.text)")
      ->each([&](const std::string&) { encode_text_set = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      auto cfg = resolve(synth_opts);
      cfg.synth.validate(cfg.encoder.row_cap);
      const auto samples = sss::ingest::generate_synthetic(cfg.synth);
      with_output(cfg.out, false, [&](std::ostream& os) { sss::ingest::write_tsv(os, samples, cfg.schema); });
    } else if (*run) {
      const auto cfg = resolve(run_opts);
      std::vector<sss::EvalRecord> records;
      with_output(cfg.out, false, [&](std::ostream& os) { records = sss::bench::run_experiment(cfg, os); });
      if (cfg.smooth_window > 1) {
        const std::string path = cfg.out.empty() ? "smoothed.csv" : cfg.out + ".smoothed.csv";
        with_output(path, false,
                    [&](std::ostream& os) { sss::bench::write_smoothed_csv(os, records, cfg.smooth_window); });
      }
    } else if (*bench) {
      const auto cfg = resolve(bench_opts);
      const auto records = sss::bench::run_bench(cfg);
      with_output(cfg.out, false, [&](std::ostream& os) { sss::bench::write_timing_csv(os, records); });
    } else if (*encode) {
      auto cfg = resolve(encode_opts);
      const std::string text = encode_text_set ? encode_text : cfg.encode_text;
      const auto img = sss::bench::encode_debug(cfg, text);
      with_output(cfg.out, true, [&](std::ostream& os) { os << sss::to_pgm(img); });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
