#include "contrastner/losses.hpp"

#include <algorithm>
#include <cmath>

#include "contrastner/error.hpp"

namespace contrastner {
namespace {

constexpr double kMinNorm = 1e-12;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// log sum_j exp(values[j]) over the selected indices.
double log_sum_exp(const std::vector<double>& values, const std::vector<std::size_t>& idx) {
  double mx = -INFINITY;
  for (auto j : idx) mx = std::max(mx, values[j]);
  double s = 0.0;
  for (auto j : idx) s += std::exp(values[j] - mx);
  return mx + std::log(s);
}

double contrastive_impl(std::span<const std::vector<double>> emb, const BatchPartition& part,
                        double tau, std::vector<std::vector<double>>* grad) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  const std::size_t n = emb.size();
  if (part.size() != n) throw Error("partition size does not match the number of embeddings");

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = norm(emb[i]);
    if (norms[i] <= kMinNorm) throw NumericError("cosine similarity of a zero-norm embedding");
  }

  std::size_t contributing = 0;
  for (std::size_t i = 0; i < n; ++i) contributing += part.positives[i].empty() ? 0 : 1;
  if (grad) {
    grad->assign(n, std::vector<double>(emb.empty() ? 0 : emb[0].size(), 0.0));
  }
  if (contributing == 0) return 0.0;

  double total = 0.0;
  std::vector<double> logits(n);
  std::vector<double> sims(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pos = part.positives[i];
    const auto& all = part.all_others[i];
    if (pos.empty()) continue;
    for (auto j : all) {
      sims[j] = cosine_sim(emb[i], emb[j]);
      logits[j] = sims[j] / tau;
    }
    const double lse_pos = log_sum_exp(logits, pos);
    const double lse_all = log_sum_exp(logits, all);
    total += lse_all - lse_pos;
    if (!grad) continue;

    // d term / d sim_ij = (softmax_A(j) - softmax_P(j)) / tau, then chain
    // through the cosine into both t_i and t_j.
    const double scale = 1.0 / (tau * static_cast<double>(contributing));
    std::vector<double> coef(n, 0.0);
    for (auto j : all) coef[j] += std::exp(logits[j] - lse_all);
    for (auto j : pos) coef[j] -= std::exp(logits[j] - lse_pos);
    auto& gi = (*grad)[i];
    for (auto j : all) {
      const double c = coef[j] * scale;
      if (c == 0.0) continue;
      auto& gj = (*grad)[j];
      const double inv = 1.0 / (norms[i] * norms[j]);
      const double si = sims[j] / (norms[i] * norms[i]);
      const double sj = sims[j] / (norms[j] * norms[j]);
      for (std::size_t e = 0; e < gi.size(); ++e) {
        gi[e] += c * (emb[j][e] * inv - si * emb[i][e]);
        gj[e] += c * (emb[i][e] * inv - sj * emb[j][e]);
      }
    }
  }
  return total / static_cast<double>(contributing);
}

double cross_entropy_impl(std::span<const std::vector<double>> logits,
                          std::span<const TokenId> targets,
                          std::vector<std::vector<double>>* grad) {
  if (logits.size() != targets.size()) throw Error("cross_entropy: logits/targets size mismatch");
  if (logits.empty()) throw Error("cross_entropy: empty batch");
  const double inv_b = 1.0 / static_cast<double>(logits.size());
  if (grad) grad->resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& z = logits[i];
    if (targets[i] >= z.size()) {
      throw Error("cross_entropy: target id " + std::to_string(targets[i]) +
                  " out of range for " + std::to_string(z.size()) + " logits");
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    total += lse - z[targets[i]];
    if (grad) {
      auto& g = (*grad)[i];
      g.resize(z.size());
      for (std::size_t v = 0; v < z.size(); ++v) g[v] = std::exp(z[v] - lse) * inv_b;
      g[targets[i]] -= inv_b;
    }
  }
  return total * inv_b;
}

}  // namespace

void LossConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be a positive number");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error("cosine_sim: length mismatch");
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu <= kMinNorm || nv <= kMinNorm) throw NumericError("cosine similarity of a zero-norm vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  return dot / (nu * nv);
}

BatchPartition partition_batch(std::span<const std::string> labels) {
  if (labels.size() < 2) throw Error("partition_batch: batch needs at least 2 examples");
  const std::size_t n = labels.size();
  BatchPartition part;
  part.positives.resize(n);
  part.negatives.resize(n);
  part.all_others.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      part.all_others[i].push_back(j);
      (labels[j] == labels[i] ? part.positives[i] : part.negatives[i]).push_back(j);
    }
  }
  return part;
}

double contrastive_loss(std::span<const std::vector<double>> embeddings,
                        const BatchPartition& partition, double tau) {
  return contrastive_impl(embeddings, partition, tau, nullptr);
}

double contrastive_loss_with_grad(std::span<const std::vector<double>> embeddings,
                                  const BatchPartition& partition, double tau,
                                  std::vector<std::vector<double>>& d_embeddings) {
  return contrastive_impl(embeddings, partition, tau, &d_embeddings);
}

double cross_entropy_loss(std::span<const std::vector<double>> logits,
                          std::span<const TokenId> targets) {
  return cross_entropy_impl(logits, targets, nullptr);
}

double cross_entropy_loss_with_grad(std::span<const std::vector<double>> logits,
                                    std::span<const TokenId> targets,
                                    std::vector<std::vector<double>>& d_logits) {
  return cross_entropy_impl(logits, targets, &d_logits);
}

double total_loss(double lc, double ls, double lambda) { return lambda * lc + (1.0 - lambda) * ls; }

LossFn make_objective(BatchPartition partition, std::vector<TokenId> targets, LossConfig config,
                      ObjectiveTerms* terms) {
  config.validate();
  return [partition = std::move(partition), targets = std::move(targets), config,
          terms](std::span<const MaskOutput> outs) {
    const std::size_t n = outs.size();
    LossEvaluation eval;
    eval.grads.resize(n);
    double lc = 0.0;
    double ls = 0.0;

    if (config.lambda > 0.0) {
      std::vector<std::vector<double>> emb(n), d_emb;
      for (std::size_t i = 0; i < n; ++i) emb[i] = outs[i].t;
      lc = contrastive_loss_with_grad(emb, partition, config.tau, d_emb);
      for (std::size_t i = 0; i < n; ++i) {
        for (double& g : d_emb[i]) g *= config.lambda;
        eval.grads[i].d_t = std::move(d_emb[i]);
      }
    }
    if (config.lambda < 1.0) {
      std::vector<std::vector<double>> logits(n), d_logits;
      for (std::size_t i = 0; i < n; ++i) logits[i] = outs[i].logits;
      ls = cross_entropy_loss_with_grad(logits, targets, d_logits);
      for (std::size_t i = 0; i < n; ++i) {
        for (double& g : d_logits[i]) g *= 1.0 - config.lambda;
        eval.grads[i].d_logits = std::move(d_logits[i]);
      }
    }
    eval.loss = total_loss(lc, ls, config.lambda);
    if (terms) *terms = {lc, ls, eval.loss};
    return eval;
  };
}

}  // namespace contrastner
