#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "contrastner/corpus.hpp"
#include "contrastner/json_io.hpp"
#include "contrastner/train.hpp"

namespace contrastner {

struct LabelStoreEntry {
  std::vector<double> embedding;
  std::string label;
  std::size_t sentence_id = 0;
  std::size_t candidate_index = 0;
};

// Support embeddings consulted by kNN; immutable once built.
struct LabelStore {
  std::vector<LabelStoreEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

struct Metrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  // Ratios with the 0-on-empty-denominator convention.
  static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
  bool operator==(const Metrics&) const = default;
};

// Mask embeddings of every word of every support sentence, with gold labels.
LabelStore build_label_store(const Checkpoint& ckpt, std::span<const LabeledSentence> support);

// Majority vote among the top min(k, size) neighbours by cosine similarity.
// Vote ties go to the label owning the most similar neighbour; similarity
// ties rank the lower store index first.
std::string knn_predict(std::span<const double> query, const LabelStore& store, std::size_t k);

struct TaggedSentence {
  std::vector<std::string> labels;
  std::vector<EntitySpan> spans;
};

TaggedSentence tag_sentence(const Checkpoint& ckpt, const LabelStore& store,
                            std::span<const std::string> tokens, std::size_t k);

// Gold spans with BIO types mapped to display types (boundaries from BIO).
std::vector<EntitySpan> gold_spans(const LabeledSentence& sentence);

// Exact (start, end, type) matching, micro-averaged over all sentences.
Metrics evaluate(std::span<const std::vector<EntitySpan>> predicted,
                 std::span<const std::vector<EntitySpan>> gold);

// Tags every test sentence against the store and scores it.
Metrics evaluate_corpus(const Checkpoint& ckpt, const LabelStore& store,
                        std::span<const LabeledSentence> test, std::size_t k);

struct EpisodeSuiteResult {
  Metrics mean;  // mean precision/recall/f1; counts summed over splits
  std::vector<Metrics> per_split;
};

using CheckpointFactory =
    std::function<Checkpoint(std::span<const LabeledSentence> episode, std::size_t split_index)>;

// For each split: sample an episode, train on it, and evaluate on the
// sentences not in the episode.
EpisodeSuiteResult run_episode_suite(const CheckpointFactory& factory,
                                     std::span<const LabeledSentence> corpus,
                                     const FewShotSpec& spec, std::size_t k);

// {"precision", "recall", "f1", "tp", "fp", "fn", "per_split"}
OrderedJson metrics_to_json(const Metrics& metrics, std::span<const Metrics> per_split = {});

}  // namespace contrastner
