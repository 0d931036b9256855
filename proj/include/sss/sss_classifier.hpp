#pragma once

#include <span>
#include <vector>

#include "sss/cnn/resnet.hpp"
#include "sss/sentence_space.hpp"
#include "sss/stream.hpp"

namespace sss {

/// Sentence-space images classified by the residual CNN, one training epoch
/// per chunk.
class SssClassifier : public ChunkClassifier<ImageChunk> {
 public:
  explicit SssClassifier(const cnn::CnnConfig& config) : model_(config) {}

  Labels predict(const ImageChunk& chunk) override { return model_.predict(chunk.images); }

  void partial_fit(const ImageChunk& chunk, std::span<const int> labels) override {
    last_losses_ = model_.train_one_epoch(chunk.images, labels);
  }

  cnn::ResNet<float>& model() { return model_; }
  const std::vector<double>& last_losses() const { return last_losses_; }

 private:
  cnn::ResNet<float> model_;
  std::vector<double> last_losses_;
};

}  // namespace sss
