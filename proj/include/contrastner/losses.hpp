#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "contrastner/encoder.hpp"
#include "contrastner/prompt.hpp"

namespace contrastner {

// In-batch sets for each anchor i: positives share i's label, negatives do
// not, and all_others is everything except i. "O" is an ordinary label.
struct BatchPartition {
  std::vector<std::vector<std::size_t>> positives;
  std::vector<std::vector<std::size_t>> negatives;
  std::vector<std::vector<std::size_t>> all_others;

  std::size_t size() const { return all_others.size(); }
};

struct LossConfig {
  double tau = 2.0;
  double lambda = 0.5;

  void validate() const;  // tau > 0, 0 <= lambda <= 1
};

// Throws NumericError when either vector has norm <= 1e-12.
double cosine_sim(std::span<const double> u, std::span<const double> v);

// Throws Error for batches smaller than 2.
BatchPartition partition_batch(std::span<const std::string> labels);

// Supervised contrastive loss with the log outside the positive sum:
//   term_i = -log sum_{p in P(i)} exp(sim(t_i,t_p)/tau) / sum_{a in A(i)} exp(sim(t_i,t_a)/tau)
// averaged over anchors with a nonempty P(i); 0 when none qualify. Not
// clamped: the value can be negative when |P(i)| > 1.
double contrastive_loss(std::span<const std::vector<double>> embeddings,
                        const BatchPartition& partition, double tau);

// Same value; also writes d loss / d embedding for every item.
double contrastive_loss_with_grad(std::span<const std::vector<double>> embeddings,
                                  const BatchPartition& partition, double tau,
                                  std::vector<std::vector<double>>& d_embeddings);

// Mean of -log softmax(logits_i)[target_i]. Throws Error for out-of-range targets.
double cross_entropy_loss(std::span<const std::vector<double>> logits,
                          std::span<const TokenId> targets);

double cross_entropy_loss_with_grad(std::span<const std::vector<double>> logits,
                                    std::span<const TokenId> targets,
                                    std::vector<std::vector<double>>& d_logits);

// lambda * lc + (1 - lambda) * ls
double total_loss(double lc, double ls, double lambda);

// The combined training objective over mask outputs, for use with
// gradients(). Contrastive term on t, cross-entropy on the label-word logits.
struct ObjectiveTerms {
  double contrastive = 0.0;
  double cross_entropy = 0.0;
  double total = 0.0;
};

LossFn make_objective(BatchPartition partition, std::vector<TokenId> targets, LossConfig config,
                      ObjectiveTerms* terms = nullptr);

}  // namespace contrastner
