#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "contrastner/prompt.hpp"

namespace contrastner {

// Row-major dense tensor of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);

  std::size_t size() const { return data.size(); }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }

  bool operator==(const Tensor&) const = default;
};

enum class SoftInit { kGaussian, kVocabMean };

struct EncoderConfig {
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 64;
  std::size_t max_len = 64;
  std::size_t vocab_size = 0;
  std::size_t p = 4;
  std::uint64_t seed = 0;
  SoftInit soft_init = SoftInit::kGaussian;
  double soft_sigma = 0.0;  // 0 selects 1/sqrt(d_model)

  // Throws ConfigError on inconsistent dimensions.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct LayerParams {
  Tensor ln1_scale, ln1_offset;
  Tensor wq, bq, wk, wv, bv, wo, bo;  // no key bias: softmax is shift-invariant
  Tensor ln2_scale, ln2_offset;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
};

// All trainable state. The soft prompt bank is a p x d_model matrix whose
// row j replaces the input embedding at soft slot j.
struct Parameters {
  EncoderConfig config;
  Tensor word_emb;     // vocab_size x d_model
  Tensor pos_emb;      // max_len x d_model
  Tensor soft_prompt;  // p x d_model
  std::vector<LayerParams> layers;
  Tensor head_w;  // d_model x vocab_size
  Tensor head_b;  // vocab_size

  // Zero-filled tensors with the shapes implied by config.
  static Parameters zeros(const EncoderConfig& config);

  // Visits every tensor in a fixed order with a stable dotted name.
  template <typename F>
  void for_each(F&& f) {
    for_each_impl(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    for_each_impl(*this, f);
  }

  std::size_t count() const;
  bool operator==(const Parameters& other) const;

 private:
  template <typename Self, typename F>
  static void for_each_impl(Self& self, F& f) {
    f(std::string("word_emb"), self.word_emb);
    f(std::string("pos_emb"), self.pos_emb);
    f(std::string("soft_prompt"), self.soft_prompt);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      auto& L = self.layers[l];
      const std::string p = "layers." + std::to_string(l) + ".";
      f(p + "ln1.scale", L.ln1_scale);
      f(p + "ln1.offset", L.ln1_offset);
      f(p + "attn.wq", L.wq);
      f(p + "attn.bq", L.bq);
      f(p + "attn.wk", L.wk);
      f(p + "attn.wv", L.wv);
      f(p + "attn.bv", L.bv);
      f(p + "attn.wo", L.wo);
      f(p + "attn.bo", L.bo);
      f(p + "ln2.scale", L.ln2_scale);
      f(p + "ln2.offset", L.ln2_offset);
      f(p + "ff.w1", L.ff_w1);
      f(p + "ff.b1", L.ff_b1);
      f(p + "ff.w2", L.ff_w2);
      f(p + "ff.b2", L.ff_b2);
    }
    f(std::string("head.weight"), self.head_w);
    f(std::string("head.bias"), self.head_b);
  }
};

// Output at the [MASK] position: the final hidden state t and the MLM-head
// logits computed from it.
struct MaskOutput {
  std::vector<double> t;
  std::vector<double> logits;
};

struct MaskGradient {
  std::vector<double> d_t;       // empty means zero
  std::vector<double> d_logits;  // empty means zero
};

struct LossEvaluation {
  double loss = 0.0;
  std::vector<MaskGradient> grads;  // one per batch item
};

using LossFn = std::function<LossEvaluation(std::span<const MaskOutput>)>;

struct GradientResult {
  double loss = 0.0;
  Parameters grads;
};

// Weights ~ N(0, 1/d_model); layer-norm scales 1; biases and offsets 0.
Parameters init_params(const EncoderConfig& config);

// Pre-norm transformer over the first attention_len positions of each
// instance. Throws Error for out-of-range ids and NumericError (naming the
// layer) on non-finite activations.
std::vector<MaskOutput> forward(std::span<const EncodedInstance> batch, const Parameters& params);

// Loss value and exact reverse-mode gradients for every parameter tensor.
GradientResult gradients(std::span<const EncodedInstance> batch, const Parameters& params,
                         const LossFn& loss_fn);

}  // namespace contrastner
