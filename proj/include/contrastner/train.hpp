#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "contrastner/corpus.hpp"
#include "contrastner/encoder.hpp"
#include "contrastner/losses.hpp"
#include "contrastner/prompt.hpp"

namespace contrastner {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 5e-3;
  double tau = 2.0;
  double lambda = 0.5;
  int template_id = 1;
  std::size_t p = 4;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 64;
  std::size_t max_len = 64;
  std::size_t min_count = 1;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> label_words;  // overrides; see label_word_for
  double clip_norm = 0.0;    // global gradient-norm clip, 0 disables
  bool freeze_soft = false;  // keep the soft prompt bank at its initial value

  void validate() const;
  EncoderConfig encoder_config(std::size_t vocab_size) const;
  LossConfig loss_config() const { return {tau, lambda}; }
  bool operator==(const TrainConfig&) const = default;
};

// Label word scored by the MLM head for a type: explicit override, else
// "none" for O, else the lowercased type name.
std::string label_word_for(const std::string& type,
                           const std::map<std::string, std::string>& overrides);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Parameters m;
  Parameters v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const Parameters& params);
};

// Bias-corrected Adam, elementwise. Throws NumericError on a non-finite
// gradient before touching anything.
void adam_step(Parameters& params, const Parameters& grads, AdamState& state, double lr);

// Shuffled index batches for one epoch. A trailing batch of one is merged
// into its predecessor. Throws Error for fewer than 2 instances.
std::vector<std::vector<std::size_t>> make_batches(std::size_t instance_count,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   std::size_t epoch);

struct TrainMetrics {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_contrastive;
  std::vector<double> epoch_cross_entropy;
  std::size_t instances = 0;
  std::size_t steps = 0;

  bool operator==(const TrainMetrics&) const = default;
};

// Everything inference needs besides a support corpus.
struct Checkpoint {
  TrainConfig config;
  Vocabulary vocab;
  int template_id = 1;
  std::map<std::string, std::string> label_words;
  Parameters params;
  std::uint64_t seed = 0;
  TrainMetrics metrics;

  DiscreteTemplate discrete_template() const { return template_by_id(template_id); }

  // Throws Error when the vocabulary, template and parameters disagree.
  void check_consistency() const;
};

struct EpochReport {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_contrastive = 0.0;
  double mean_cross_entropy = 0.0;
};

using EpochCallback = std::function<void(const EpochReport&)>;

// Vocabulary for training: corpus tokens, then template words, then label words.
Vocabulary training_vocab(std::span<const LabeledSentence> corpus, const TrainConfig& config,
                          std::map<std::string, std::string>& label_words);

Checkpoint train(const TrainConfig& config, std::span<const LabeledSentence> corpus,
                 const EpochCallback& on_epoch = {});

}  // namespace contrastner
