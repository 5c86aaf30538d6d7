#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "contrastner/corpus.hpp"

namespace contrastner {

// Sentences drawn from fixed frames filled with PER/LOC/ORG gazetteer
// entries, BIO-tagged. Deterministic in (count, seed).
std::vector<LabeledSentence> gazetteer_corpus(std::size_t count, std::uint64_t seed);

struct ToySplit {
  std::vector<LabeledSentence> train;
  std::vector<LabeledSentence> test;
};

// 200 training and 50 test sentences from one seeded draw.
ToySplit toy_split(std::uint64_t seed = 0, std::size_t train_count = 200, std::size_t test_count = 50);

}  // namespace contrastner
