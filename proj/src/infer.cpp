#include "contrastner/infer.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "contrastner/error.hpp"
#include "contrastner/losses.hpp"

namespace contrastner {
namespace {

std::vector<EncodedInstance> encode_tokens(const Checkpoint& ckpt, const LabeledSentence& sentence,
                                           std::size_t sentence_id) {
  std::vector<EncodedInstance> out;
  for (const auto& inst : expand(sentence, ckpt.discrete_template(), ckpt.config.p, sentence_id)) {
    out.push_back(encode(inst, ckpt.vocab, ckpt.config.max_len));
  }
  return out;
}

}  // namespace

Metrics Metrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  Metrics m{tp, fp, fn, 0.0, 0.0, 0.0};
  const auto d = [](std::size_t x) { return static_cast<double>(x); };
  if (tp + fp > 0) m.precision = d(tp) / d(tp + fp);
  if (tp + fn > 0) m.recall = d(tp) / d(tp + fn);
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

LabelStore build_label_store(const Checkpoint& ckpt, std::span<const LabeledSentence> support) {
  if (support.empty()) throw Error("support corpus is empty");
  ckpt.check_consistency();
  LabelStore store;
  for (std::size_t s = 0; s < support.size(); ++s) {
    const auto batch = encode_tokens(ckpt, support[s], s);
    const auto outs = forward(batch, ckpt.params);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      store.entries.push_back({outs[i].t, batch[i].gold_label, s, batch[i].candidate_index});
    }
  }
  return store;
}

std::string knn_predict(std::span<const double> query, const LabelStore& store, std::size_t k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (store.empty()) throw Error("label store is empty");

  std::vector<double> sims(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) sims[i] = cosine_sim(query, store.entries[i].embedding);
  std::vector<std::size_t> order(store.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t m = std::min(k, store.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return sims[a] != sims[b] ? sims[a] > sims[b] : a < b;
                    });

  std::map<std::string, std::size_t> votes;
  for (std::size_t r = 0; r < m; ++r) ++votes[store.entries[order[r]].label];
  std::size_t best = 0;
  for (const auto& [label, count] : votes) best = std::max(best, count);
  // Neighbours are in rank order, so the first one whose label has the top
  // vote count decides.
  for (std::size_t r = 0; r < m; ++r) {
    const auto& label = store.entries[order[r]].label;
    if (votes[label] == best) return label;
  }
  throw std::logic_error("knn_predict: no label selected");
}

TaggedSentence tag_sentence(const Checkpoint& ckpt, const LabelStore& store,
                            std::span<const std::string> tokens, std::size_t k) {
  if (tokens.empty()) throw Error("cannot tag an empty sentence");
  LabeledSentence sentence{{tokens.begin(), tokens.end()},
                           std::vector<std::string>(tokens.size(), std::string(kOutsideTag))};
  const auto batch = encode_tokens(ckpt, sentence, 0);
  const auto outs = forward(batch, ckpt.params);
  TaggedSentence tagged;
  for (const auto& out : outs) tagged.labels.push_back(knn_predict(out.t, store, k));
  tagged.spans = spans_from_labels(tagged.labels);
  return tagged;
}

std::vector<EntitySpan> gold_spans(const LabeledSentence& sentence) {
  auto spans = extract_spans(sentence);
  if (tag_scheme(sentence) == TagScheme::kBio) {
    const auto& map = default_type_map();
    for (auto& span : spans) {
      if (const auto it = map.find(span.entity_type); it != map.end()) span.entity_type = it->second;
    }
  }
  return spans;
}

Metrics evaluate(std::span<const std::vector<EntitySpan>> predicted,
                 std::span<const std::vector<EntitySpan>> gold) {
  if (predicted.size() != gold.size()) {
    throw Error("evaluate: " + std::to_string(predicted.size()) + " predicted sentences vs " +
                std::to_string(gold.size()) + " gold sentences");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t s = 0; s < predicted.size(); ++s) {
    auto pred = predicted[s];
    auto ref = gold[s];
    std::sort(pred.begin(), pred.end());
    std::sort(ref.begin(), ref.end());
    std::vector<EntitySpan> common;
    std::set_intersection(pred.begin(), pred.end(), ref.begin(), ref.end(), std::back_inserter(common));
    tp += common.size();
    fp += pred.size() - common.size();
    fn += ref.size() - common.size();
  }
  return Metrics::from_counts(tp, fp, fn);
}

Metrics evaluate_corpus(const Checkpoint& ckpt, const LabelStore& store,
                        std::span<const LabeledSentence> test, std::size_t k) {
  std::vector<std::vector<EntitySpan>> predicted, gold;
  for (const auto& sentence : test) {
    predicted.push_back(tag_sentence(ckpt, store, sentence.tokens, k).spans);
    gold.push_back(gold_spans(sentence));
  }
  return evaluate(predicted, gold);
}

EpisodeSuiteResult run_episode_suite(const CheckpointFactory& factory,
                                     std::span<const LabeledSentence> corpus,
                                     const FewShotSpec& spec, std::size_t k) {
  if (spec.splits < 1) throw ConfigError("splits must be at least 1");
  EpisodeSuiteResult result;
  double p = 0.0, r = 0.0, f = 0.0;
  for (std::size_t split = 0; split < spec.splits; ++split) {
    const auto picked = sample_k_shot_indices(corpus, spec, split);
    std::vector<LabeledSentence> episode, held_out;
    std::size_t next = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (next < picked.size() && picked[next] == i) {
        episode.push_back(corpus[i]);
        ++next;
      } else {
        held_out.push_back(corpus[i]);
      }
    }
    const Checkpoint ckpt = factory(episode, split);
    const LabelStore store = build_label_store(ckpt, episode);
    const Metrics m = evaluate_corpus(ckpt, store, held_out, k);
    result.per_split.push_back(m);
    result.mean.true_positives += m.true_positives;
    result.mean.false_positives += m.false_positives;
    result.mean.false_negatives += m.false_negatives;
    p += m.precision;
    r += m.recall;
    f += m.f1;
  }
  const double n = static_cast<double>(spec.splits);
  result.mean.precision = p / n;
  result.mean.recall = r / n;
  result.mean.f1 = f / n;
  return result;
}

OrderedJson metrics_to_json(const Metrics& m, std::span<const Metrics> per_split) {
  OrderedJson j = OrderedJson::object();
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.true_positives;
  j["fp"] = m.false_positives;
  j["fn"] = m.false_negatives;
  OrderedJson splits = OrderedJson::array();
  for (const auto& s : per_split) {
    OrderedJson entry = metrics_to_json(s);
    entry.erase("per_split");
    splits.push_back(std::move(entry));
  }
  j["per_split"] = std::move(splits);
  return j;
}

}  // namespace contrastner
