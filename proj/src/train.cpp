#include "contrastner/train.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "contrastner/error.hpp"
#include "contrastner/rng.hpp"

namespace contrastner {
namespace {

template <typename F>
void zip_tensors(Parameters& a, const Parameters& b, F&& f) {
  std::vector<Tensor*> lhs;
  std::vector<const Tensor*> rhs;
  a.for_each([&](const std::string&, Tensor& t) { lhs.push_back(&t); });
  b.for_each([&](const std::string&, const Tensor& t) { rhs.push_back(&t); });
  if (lhs.size() != rhs.size()) throw std::logic_error("parameter structures differ");
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (lhs[i]->shape != rhs[i]->shape) throw std::logic_error("parameter shapes differ");
    f(*lhs[i], *rhs[i]);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (min_count < 1) throw ConfigError("min_count must be at least 1");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
  loss_config().validate();
  template_by_id(template_id);
  encoder_config(Vocabulary::kReservedCount + p).validate();
}

EncoderConfig TrainConfig::encoder_config(std::size_t vocab_size) const {
  EncoderConfig cfg;
  cfg.d_model = d_model;
  cfg.n_layers = n_layers;
  cfg.n_heads = n_heads;
  cfg.d_ff = d_ff;
  cfg.max_len = max_len;
  cfg.vocab_size = vocab_size;
  cfg.p = p;
  cfg.seed = seed;
  return cfg;
}

std::string label_word_for(const std::string& type,
                           const std::map<std::string, std::string>& overrides) {
  if (const auto it = overrides.find(type); it != overrides.end()) return it->second;
  if (type == kOutsideTag) return "none";
  const auto pieces = tokenize(type);
  std::string word;
  for (const auto& p : pieces) word += p;
  return word;
}

AdamState AdamState::zeros_like(const Parameters& params) {
  return {Parameters::zeros(params.config), Parameters::zeros(params.config), 0};
}

void adam_step(Parameters& params, const Parameters& grads, AdamState& state, double lr) {
  grads.for_each([](const std::string& name, const Tensor& g) {
    for (double x : g.data) {
      if (!std::isfinite(x)) throw NumericError("non-finite gradient in " + name);
    }
  });

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, t);

  std::vector<Tensor*> ms, vs;
  state.m.for_each([&](const std::string&, Tensor& x) { ms.push_back(&x); });
  state.v.for_each([&](const std::string&, Tensor& x) { vs.push_back(&x); });
  std::size_t k = 0;
  zip_tensors(params, grads, [&](Tensor& p, const Tensor& g) {
    Tensor& m = *ms[k];
    Tensor& v = *vs[k];
    ++k;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double gi = g.data[i];
      m.data[i] = AdamState::kBeta1 * m.data[i] + (1.0 - AdamState::kBeta1) * gi;
      v.data[i] = AdamState::kBeta2 * v.data[i] + (1.0 - AdamState::kBeta2) * gi * gi;
      const double m_hat = m.data[i] / c1;
      const double v_hat = v.data[i] / c2;
      p.data[i] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
    }
  });
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t instance_count,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   std::size_t epoch) {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (instance_count < 2) throw Error("need at least 2 training instances to form a batch");
  std::vector<std::size_t> order(instance_count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(mix_seed(seed, 1), epoch));
  rng.shuffle(std::span(order));

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < instance_count; start += batch_size) {
    const std::size_t end = std::min(instance_count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

void Checkpoint::check_consistency() const {
  if (vocab.soft_count() != config.p || params.config.p != config.p) {
    throw Error("vocabulary/template mismatch: checkpoint has " + std::to_string(vocab.soft_count()) +
                " soft slots in its vocabulary but p = " + std::to_string(config.p));
  }
  if (vocab.size() != params.config.vocab_size) {
    throw Error("vocabulary/template mismatch: vocabulary has " + std::to_string(vocab.size()) +
                " tokens but the encoder expects " + std::to_string(params.config.vocab_size));
  }
  if (template_id != config.template_id) throw Error("vocabulary/template mismatch: template_id differs from config");
  std::string pattern = discrete_template().pattern;
  pattern.erase(pattern.find(kCandidatePlaceholder), kCandidatePlaceholder.size());
  for (const auto& word : tokenize(pattern)) {
    if (!vocab.contains(word)) {
      throw Error("vocabulary/template mismatch: template word '" + word + "' is not in the vocabulary");
    }
  }
  for (const auto& [type, word] : label_words) {
    if (!vocab.contains(word)) throw Error("label word '" + word + "' for " + type + " is not in the vocabulary");
  }
}

Vocabulary training_vocab(std::span<const LabeledSentence> corpus, const TrainConfig& config,
                          std::map<std::string, std::string>& label_words) {
  Vocabulary vocab = build_vocab(corpus, config.min_count, config.p);
  std::string pattern = template_by_id(config.template_id).pattern;
  pattern.erase(pattern.find(kCandidatePlaceholder), kCandidatePlaceholder.size());
  for (const auto& word : tokenize(pattern)) vocab.add(word);

  std::set<std::string> types{std::string(kOutsideTag)};
  for (const auto& s : corpus) {
    for (auto& t : type_labels(s)) types.insert(std::move(t));
  }
  label_words.clear();
  std::set<std::string> used;
  for (const auto& type : types) {
    const std::string word = label_word_for(type, config.label_words);
    const auto pieces = tokenize(word);
    if (pieces.size() != 1 || pieces[0] != word) {
      throw ConfigError("label word '" + word + "' for " + type + " must be a single lowercase token");
    }
    if (!used.insert(word).second) throw ConfigError("label word '" + word + "' is used by two types");
    label_words.emplace(type, word);
    vocab.add(word);
  }
  return vocab;
}

Checkpoint train(const TrainConfig& config, std::span<const LabeledSentence> corpus,
                 const EpochCallback& on_epoch) {
  config.validate();
  if (corpus.empty()) throw Error("training corpus is empty");

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.template_id = config.template_id;
  ckpt.seed = config.seed;
  ckpt.vocab = training_vocab(corpus, config, ckpt.label_words);
  ckpt.params = init_params(config.encoder_config(ckpt.vocab.size()));

  const auto tmpl = template_by_id(config.template_id);
  const auto instances = encode_corpus(corpus, tmpl, ckpt.vocab, config.max_len);
  std::vector<TokenId> targets;
  targets.reserve(instances.size());
  for (const auto& inst : instances) targets.push_back(ckpt.vocab.id(ckpt.label_words.at(inst.gold_label)));
  ckpt.metrics.instances = instances.size();

  AdamState adam = AdamState::zeros_like(ckpt.params);
  const LossConfig loss_cfg = config.loss_config();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(instances.size(), config.batch_size, config.seed, epoch);
    EpochReport report{epoch + 1, 0.0, 0.0, 0.0};
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<EncodedInstance> batch;
      std::vector<std::string> labels;
      std::vector<TokenId> batch_targets;
      for (auto idx : batches[b]) {
        batch.push_back(instances[idx]);
        labels.push_back(instances[idx].gold_label);
        batch_targets.push_back(targets[idx]);
      }
      ObjectiveTerms terms;
      auto objective = make_objective(partition_batch(labels), std::move(batch_targets), loss_cfg, &terms);
      GradientResult step = gradients(batch, ckpt.params, objective);
      if (!std::isfinite(step.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(b + 1));
      }
      if (config.freeze_soft) std::fill(step.grads.soft_prompt.data.begin(), step.grads.soft_prompt.data.end(), 0.0);
      if (config.clip_norm > 0.0) {
        double sq = 0.0;
        step.grads.for_each([&](const std::string&, const Tensor& g) {
          for (double x : g.data) sq += x * x;
        });
        const double norm = std::sqrt(sq);
        if (norm > config.clip_norm) {
          const double s = config.clip_norm / norm;
          step.grads.for_each([&](const std::string&, Tensor& g) {
            for (double& x : g.data) x *= s;
          });
        }
      }
      adam_step(ckpt.params, step.grads, adam, config.learning_rate);
      ++ckpt.metrics.steps;
      report.mean_loss += terms.total;
      report.mean_contrastive += terms.contrastive;
      report.mean_cross_entropy += terms.cross_entropy;
    }
    const double nb = static_cast<double>(batches.size());
    report.mean_loss /= nb;
    report.mean_contrastive /= nb;
    report.mean_cross_entropy /= nb;
    ckpt.metrics.epoch_loss.push_back(report.mean_loss);
    ckpt.metrics.epoch_contrastive.push_back(report.mean_contrastive);
    ckpt.metrics.epoch_cross_entropy.push_back(report.mean_cross_entropy);
    if (on_epoch) on_epoch(report);
  }
  return ckpt;
}

}  // namespace contrastner
