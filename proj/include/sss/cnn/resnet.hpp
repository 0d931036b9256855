#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sss/cnn/layers.hpp"
#include "sss/cnn/tensor.hpp"
#include "sss/error.hpp"
#include "sss/types.hpp"

namespace sss::cnn {

struct StemConfig {
  int kernel = 3;
  int stride = 1;
  int channels = 8;
  bool max_pool = false;  // 3x3 stride-2 max pool after the stem
};

struct StageConfig {
  int blocks = 1;
  int channels = 8;
};

struct CnnConfig {
  StemConfig stem;
  std::vector<StageConfig> stages{{1, 8}, {1, 16}};
  int n_classes = 2;
  double lr = 0.001;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  // Start the classifier head at zero (uniform softmax). Off by default.
  bool zero_init_head = false;

  void validate() const {
    if (!(lr >= 0)) throw ConfigError("cnn lr must be >= 0");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("cnn momentum must lie in [0, 1)");
    if (batch_size < 1) throw ConfigError("cnn batch_size must be >= 1");
    if (n_classes < 2) throw ConfigError("cnn n_classes must be >= 2");
    if (stages.empty()) throw ConfigError("cnn needs at least one stage");
  }

  static CnnConfig resnet18() {
    CnnConfig c;
    c.stem = {7, 2, 64, true};
    c.stages = {{2, 64}, {2, 128}, {2, 256}, {2, 512}};
    return c;
  }
  static CnnConfig tiny() { return CnnConfig{}; }
  static CnnConfig preset(const std::string& name) {
    if (name == "resnet18") return resnet18();
    if (name == "tiny") return tiny();
    throw ConfigError("unknown cnn preset '" + name + "' (expected resnet18 or tiny)");
  }
};

/// conv-bn-relu-conv-bn plus identity or 1x1-projection shortcut, then relu.
template <class T>
class BasicBlock {
 public:
  BasicBlock(const std::string& name, int in_channels, int out_channels, int stride)
      : conv1_(name + ".conv1", in_channels, out_channels, 3, stride, 1),
        bn1_(name + ".bn1", out_channels),
        conv2_(name + ".conv2", out_channels, out_channels, 3, 1, 1),
        bn2_(name + ".bn2", out_channels),
        project_(stride != 1 || in_channels != out_channels) {
    if (project_) {
      proj_conv_ = Conv2d<T>(name + ".proj", in_channels, out_channels, 1, stride, 0);
      proj_bn_ = BatchNorm2d<T>(name + ".proj_bn", out_channels);
    }
  }

  void init(std::mt19937_64& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    if (project_) proj_conv_.init(rng);
  }

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode, bool update_running) {
    Tensor4<T> out = relu1_.forward(bn1_.forward(conv1_.forward(x), mode, update_running));
    out = bn2_.forward(conv2_.forward(out), mode, update_running);
    if (project_) {
      const Tensor4<T> sc = proj_bn_.forward(proj_conv_.forward(x), mode, update_running);
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += sc.data[i];
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += x.data[i];
    }
    return relu2_.forward(std::move(out));
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    const Tensor4<T> d_sum = relu2_.backward(dy);
    Tensor4<T> dx = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(d_sum)))));
    const Tensor4<T> d_short = project_ ? proj_conv_.backward(proj_bn_.backward(d_sum)) : d_sum;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += d_short.data[i];
    return dx;
  }

  template <class F>
  void visit(F&& f) {
    f(conv1_.weight), f(bn1_.scale), f(bn1_.shift), f(conv2_.weight), f(bn2_.scale), f(bn2_.shift);
    if (project_) f(proj_conv_.weight), f(proj_bn_.scale), f(proj_bn_.shift);
  }
  template <class F>
  void visit_buffers(F&& f) {
    f(bn1_.running_mean), f(bn1_.running_var), f(bn2_.running_mean), f(bn2_.running_var);
    if (project_) f(proj_bn_.running_mean), f(proj_bn_.running_var);
  }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  ReLU<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  bool project_;
  Conv2d<T> proj_conv_;
  BatchNorm2d<T> proj_bn_;
  ReLU<T> relu2_;
};

/// Compact residual CNN: 3-channel stem, residual stages, global average
/// pool, linear head, softmax. Trained with classical momentum SGD.
template <class T>
class ResNet {
 public:
  static constexpr int kInputChannels = 3;

  explicit ResNet(const CnnConfig& config) : config_(config), rng_(config.seed) {
    config_.validate();
    const auto& s = config_.stem;
    stem_conv_ = Conv2d<T>("stem.conv", kInputChannels, s.channels, s.kernel, s.stride, s.kernel / 2);
    stem_bn_ = BatchNorm2d<T>("stem.bn", s.channels);
    int channels = s.channels;
    for (std::size_t si = 0; si < config_.stages.size(); ++si) {
      const auto& st = config_.stages[si];
      for (int b = 0; b < st.blocks; ++b) {
        const int stride = (si > 0 && b == 0) ? 2 : 1;
        blocks_.emplace_back("stage" + std::to_string(si) + ".block" + std::to_string(b), channels, st.channels,
                             stride);
        channels = st.channels;
      }
    }
    head_ = Linear<T>("head", channels, config_.n_classes);
    stem_conv_.init(rng_);
    for (auto& b : blocks_) b.init(rng_);
    head_.init(rng_);
    if (config_.zero_init_head) std::fill(head_.weight.value.begin(), head_.weight.value.end(), T(0));
  }

  const CnnConfig& config() const { return config_; }

  /// Replicates each single-channel image into the three input channels.
  static Tensor4<T> replicate_channels(std::span<const Image* const> images) {
    if (images.empty()) throw ShapeError("empty image batch");
    const int h = static_cast<int>(images[0]->rows()), w = static_cast<int>(images[0]->cols());
    Tensor4<T> x(static_cast<int>(images.size()), kInputChannels, h, w);
    for (int n = 0; n < x.n; ++n) {
      const Image& img = *images[n];
      if (img.rows() != h || img.cols() != w) throw ShapeError("image batch with mixed shapes");
      for (int c = 0; c < kInputChannels; ++c) {
        T* dst = x.data.data() + x.offset(n, c);
        for (Eigen::Index i = 0; i < img.size(); ++i) dst[i] = static_cast<T>(img.data()[i]);
      }
    }
    return x;
  }

  /// Logits for an NCHW batch. update_running = false leaves batch-norm
  /// running statistics untouched (used by finite-difference checks).
  RowMat<T> logits(const Tensor4<T>& x, Mode mode, bool update_running = true) {
    if (x.c != kInputChannels) throw ShapeError("network input must have 3 channels, got " + x.shape_string());
    if (input_h_ == 0) {
      input_h_ = x.h;
      input_w_ = x.w;
    } else if (x.h != input_h_ || x.w != input_w_) {
      throw ShapeError("network input " + x.shape_string() + " differs from configured " +
                       std::to_string(input_h_) + "x" + std::to_string(input_w_));
    }
    // Checked before the ReLU, which would map NaN to zero.
    Tensor4<T> a = stem_relu_.forward(check("stem", stem_bn_.forward(stem_conv_.forward(x), mode, update_running)));
    if (config_.stem.max_pool) a = check("stem.pool", pool_.forward(a));
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      a = check("block" + std::to_string(i), blocks_[i].forward(a, mode, update_running));
    }
    pooled_dims_ = {a.n, a.c, a.h, a.w};
    RowMat<T> feats(a.n, a.c);
    const double inv = 1.0 / static_cast<double>(a.plane());
    for (int n = 0; n < a.n; ++n) {
      for (int c = 0; c < a.c; ++c) {
        const T* p = a.data.data() + a.offset(n, c);
        double s = 0;
        for (std::size_t i = 0; i < a.plane(); ++i) s += p[i];
        feats(n, c) = static_cast<T>(s * inv);
      }
    }
    RowMat<T> z = head_.forward(feats);
    if (!z.allFinite()) throw NumericError("non-finite activation in layer head");
    return z;
  }

  static RowMat<T> softmax(const RowMat<T>& z) {
    RowMat<T> p(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const T mx = z.row(r).maxCoeff();
      double sum = 0;
      for (Eigen::Index c = 0; c < z.cols(); ++c) sum += std::exp(static_cast<double>(z(r, c) - mx));
      for (Eigen::Index c = 0; c < z.cols(); ++c) p(r, c) = static_cast<T>(std::exp(static_cast<double>(z(r, c) - mx)) / sum);
    }
    return p;
  }

  /// Class probabilities, n x C.
  RowMat<T> forward(const Tensor4<T>& x, Mode mode = Mode::kEval) { return softmax(logits(x, mode)); }

  /// Mean cross-entropy of a batch; also fills parameter gradients (added to
  /// existing ones) when `backprop` is set. loss_scale multiplies the loss.
  double loss_and_backward(const Tensor4<T>& x, std::span<const int> labels, bool backprop, double loss_scale = 1.0,
                           bool update_running = true) {
    const RowMat<T> z = logits(x, Mode::kTrain, update_running);
    const Eigen::Index n = z.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) throw ShapeError("label count does not match batch");
    // Log-softmax in double for a stable loss.
    RowMat<T> dz(n, z.cols());
    double loss = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const int y = labels[static_cast<std::size_t>(r)];
      if (y < 0 || y >= z.cols()) throw ShapeError("label " + std::to_string(y) + " out of range");
      const double mx = z.row(r).maxCoeff();
      double sum = 0;
      for (Eigen::Index c = 0; c < z.cols(); ++c) sum += std::exp(static_cast<double>(z(r, c)) - mx);
      const double log_sum = mx + std::log(sum);
      loss -= static_cast<double>(z(r, y)) - log_sum;
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double p = std::exp(static_cast<double>(z(r, c)) - log_sum);
        dz(r, c) = static_cast<T>(loss_scale * (p - (c == y ? 1.0 : 0.0)) / static_cast<double>(n));
      }
    }
    loss = loss_scale * loss / static_cast<double>(n);
    if (!std::isfinite(loss)) throw NumericError("non-finite loss " + std::to_string(loss));
    if (backprop) backward(dz);
    return loss;
  }

  void zero_grad() {
    visit_params([](Param<T>& p) { p.zero_grad(); });
  }

  /// v <- momentum * v + g;  w <- w - lr * v
  void sgd_step() {
    const T lr = static_cast<T>(config_.lr), mom = static_cast<T>(config_.momentum);
    visit_params([&](Param<T>& p) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        p.velocity[i] = mom * p.velocity[i] + p.grad[i];
        p.value[i] -= lr * p.velocity[i];
      }
    });
  }

  /// One pass over a chunk in a seeded shuffled order, minibatches of
  /// batch_size (the final short batch is kept). Returns the per-batch loss.
  std::vector<double> train_one_epoch(std::span<const Image> images, std::span<const int> labels) {
    if (images.size() != labels.size()) throw ShapeError("train_one_epoch: images/labels length mismatch");
    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<double> losses;
    std::vector<const Image*> batch;
    std::vector<int> batch_labels;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      batch.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&images[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      zero_grad();
      double loss = 0;
      try {
        loss = loss_and_backward(replicate_channels(batch), batch_labels, true);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at minibatch " + std::to_string(losses.size()));
      }
      sgd_step();
      losses.push_back(loss);
    }
    return losses;
  }

  /// Eval-mode class predictions, processed in slices to bound memory.
  Labels predict(std::span<const Image> images, std::size_t slice = 32) {
    Labels out;
    out.reserve(images.size());
    std::vector<const Image*> batch;
    for (std::size_t start = 0; start < images.size(); start += slice) {
      batch.clear();
      for (std::size_t i = start; i < std::min(images.size(), start + slice); ++i) batch.push_back(&images[i]);
      const RowMat<T> z = logits(replicate_channels(batch), Mode::kEval);
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        Eigen::Index arg = 0;
        z.row(r).maxCoeff(&arg);
        out.push_back(static_cast<int>(arg));
      }
    }
    return out;
  }

  template <class F>
  void visit_params(F&& f) {
    f(stem_conv_.weight), f(stem_bn_.scale), f(stem_bn_.shift);
    for (auto& b : blocks_) b.visit(f);
    f(head_.weight), f(head_.bias);
  }
  template <class F>
  void visit_buffers(F&& f) {
    f(stem_bn_.running_mean), f(stem_bn_.running_var);
    for (auto& b : blocks_) b.visit_buffers(f);
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    visit_params([&](Param<T>& p) { n += p.size(); });
    return n;
  }

  std::mt19937_64& rng() { return rng_; }
  std::pair<int, int> input_shape() const { return {input_h_, input_w_}; }

  /// Binary checkpoint: magic, config, input shape, rng state, then every
  /// parameter (value and velocity) and buffer with name and shape.
  void save(std::ostream& out) {
    out.write(kMagic, sizeof kMagic);
    std::ostringstream cfg;
    cfg << config_.stem.kernel << ' ' << config_.stem.stride << ' ' << config_.stem.channels << ' '
        << config_.stem.max_pool << ' ' << config_.stages.size();
    for (const auto& s : config_.stages) cfg << ' ' << s.blocks << ' ' << s.channels;
    cfg << ' ' << config_.n_classes << ' ' << config_.batch_size << ' ' << config_.seed << ' ' << input_h_ << ' '
        << input_w_;
    write_string(out, cfg.str());
    write_pod(out, config_.lr);
    write_pod(out, config_.momentum);
    std::ostringstream rng_state;
    rng_state << rng_;
    write_string(out, rng_state.str());
    const std::uint32_t elem = sizeof(T);
    write_pod(out, elem);
    visit_params([&](Param<T>& p) {
      write_array(out, p.name, p.shape, p.value);
      write_array(out, p.name + "#velocity", p.shape, p.velocity);
    });
    visit_buffers([&](Buffer<T>& b) { write_array(out, b.name, b.shape, b.value); });
    if (!out) throw std::runtime_error("checkpoint write failed");
  }

  static ResNet load(std::istream& in) {
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + sizeof magic, kMagic)) throw FormatError("not a CNN checkpoint");
    std::istringstream cfg(read_string(in));
    CnnConfig c;
    std::size_t n_stages = 0;
    cfg >> c.stem.kernel >> c.stem.stride >> c.stem.channels >> c.stem.max_pool >> n_stages;
    c.stages.resize(n_stages);
    for (auto& s : c.stages) cfg >> s.blocks >> s.channels;
    int h = 0, w = 0;
    cfg >> c.n_classes >> c.batch_size >> c.seed >> h >> w;
    if (!cfg) throw FormatError("corrupt checkpoint config");
    c.lr = read_pod<double>(in);
    c.momentum = read_pod<double>(in);
    ResNet model(c);
    model.input_h_ = h;
    model.input_w_ = w;
    std::istringstream rng_state(read_string(in));
    rng_state >> model.rng_;
    if (read_pod<std::uint32_t>(in) != sizeof(T)) throw FormatError("checkpoint scalar width mismatch");
    model.visit_params([&](Param<T>& p) {
      read_array(in, p.name, p.shape, p.value);
      read_array(in, p.name + "#velocity", p.shape, p.velocity);
    });
    model.visit_buffers([&](Buffer<T>& b) { read_array(in, b.name, b.shape, b.value); });
    if (!in) throw FormatError("truncated checkpoint");
    return model;
  }

 private:
  static constexpr char kMagic[8] = {'S', 'S', 'S', 'C', 'N', 'N', '0', '1'};

  template <class P>
  static void write_pod(std::ostream& out, const P& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  template <class P>
  static P read_pod(std::istream& in) {
    P v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw FormatError("truncated checkpoint");
    return v;
  }
  static void write_string(std::ostream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint64_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  static std::string read_string(std::istream& in) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > (1u << 24)) throw FormatError("corrupt checkpoint string length");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
  }
  static void write_array(std::ostream& out, const std::string& name, const std::vector<int>& shape,
                          const std::vector<T>& v) {
    write_string(out, name);
    write_pod(out, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) write_pod(out, static_cast<std::int32_t>(d));
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  static void read_array(std::istream& in, const std::string& name, const std::vector<int>& shape, std::vector<T>& v) {
    if (read_string(in) != name) throw FormatError("checkpoint array order mismatch at " + name);
    const auto rank = read_pod<std::uint32_t>(in);
    if (rank != shape.size()) throw FormatError("checkpoint rank mismatch for " + name);
    for (int d : shape) {
      if (read_pod<std::int32_t>(in) != d) throw FormatError("checkpoint shape mismatch for " + name);
    }
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }

  Tensor4<T> check(const std::string& layer, Tensor4<T> t) const {
    if (!t.all_finite()) throw NumericError("non-finite activation in layer " + layer);
    return t;
  }

  void backward(const RowMat<T>& dz) {
    const RowMat<T> dfeat = head_.backward(dz);
    const auto [pn, pc, ph, pw] = pooled_dims_;
    const std::size_t plane = static_cast<std::size_t>(ph) * pw;
    Tensor4<T> da(pn, pc, ph, pw);
    const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
    for (int n = 0; n < pn; ++n) {
      for (int c = 0; c < pc; ++c) {
        T* p = da.data.data() + da.offset(n, c);
        std::fill(p, p + plane, dfeat(n, c) * inv);
      }
    }
    for (std::size_t i = blocks_.size(); i-- > 0;) da = blocks_[i].backward(da);
    if (config_.stem.max_pool) da = pool_.backward(da);
    stem_conv_.backward(stem_bn_.backward(stem_relu_.backward(da)));
  }

  CnnConfig config_;
  std::mt19937_64 rng_;
  Conv2d<T> stem_conv_;
  BatchNorm2d<T> stem_bn_;
  ReLU<T> stem_relu_;
  MaxPool2d<T> pool_;
  std::vector<BasicBlock<T>> blocks_;
  Linear<T> head_;
  std::array<int, 4> pooled_dims_{};
  int input_h_ = 0, input_w_ = 0;
};

}  // namespace sss::cnn
