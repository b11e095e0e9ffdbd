#pragma once

// A small post-LayerNorm transformer encoder with a softmax head on the
// first (CLS) position. All parameters live in one flat buffer so the
// optimizer, checkpointing and gradient reduction treat them uniformly.

#include <cstdint>
#include <span>
#include <vector>

namespace depkit::nn {

struct NetConfig {
  int vocab_size = 0;
  int max_positions = 512;
  int d_model = 32;
  int heads = 2;
  int ff = 64;
  int layers = 2;
  int classes = 2;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct Slot {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

struct LayerSlots {
  Slot wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
};

struct ParamLayout {
  Slot tok_emb, pos_emb, emb_ln_g, emb_ln_b;
  std::vector<LayerSlots> layers;
  Slot head_w, head_b;
  std::size_t total = 0;

  explicit ParamLayout(const NetConfig& cfg);
};

class EncoderNet {
 public:
  explicit EncoderNet(const NetConfig& cfg);

  const NetConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.total; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Weight matrices ~ N(0, stddev), LayerNorm gains 1, biases 0.
  void initialize(std::uint64_t seed, double stddev = 0.02);

  // Softmax class probabilities for one token-id sequence.
  void predict(std::span<const int> ids, std::span<double> probs) const;

  // Cross-entropy loss of one sequence; adds d(loss)/d(params) into grad.
  double accumulate_gradient(std::span<const int> ids, int label, std::span<double> grad) const;

 private:
  NetConfig cfg_;
  ParamLayout layout_;
  std::vector<double> params_;
};

struct Batch {
  std::span<const std::vector<int>> sequences;
  std::span<const int> labels;
};

// Mean loss over the batch; grad receives the mean gradient.
namespace serial {
double batch_gradient(const EncoderNet& net, Batch batch, std::span<double> grad);
}
namespace parallel {
// Sequences are processed concurrently into per-sample buffers and reduced in
// sample order, so the result is bit-identical to the serial version.
double batch_gradient(const EncoderNet& net, Batch batch, std::span<double> grad);
}

// Adam with bias correction; the caller supplies the step's learning rate.
class Adam {
 public:
  explicit Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::int64_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace depkit::nn
