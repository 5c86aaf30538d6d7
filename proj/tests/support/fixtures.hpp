#pragma once

#include <random>
#include <string>
#include <vector>

#include "contrastner/encoder.hpp"
#include "contrastner/prompt.hpp"
#include "contrastner/synthetic.hpp"

namespace fixtures {

struct MicroProblem {
  contrastner::EncoderConfig config;
  std::vector<contrastner::EncodedInstance> batch;
  std::vector<std::string> labels;
  std::vector<contrastner::TokenId> targets;
};

// A tiny random encoder problem: a few prompt instances from the gazetteer
// corpus, encoded against a vocabulary that keeps every word.
inline MicroProblem micro_problem(std::mt19937_64& rng, std::size_t d_model, std::size_t n_layers,
                                  std::size_t n_heads, std::size_t batch_size, std::size_t p) {
  using namespace contrastner;
  const auto corpus = gazetteer_corpus(3, rng());
  Vocabulary vocab = build_vocab(corpus, 1, p);
  for (auto w : {"is", "a", "entity", ".", "person", "location", "organization", "none"}) vocab.add(w);

  std::vector<EncodedInstance> pool;
  for (std::size_t s = 0; s < corpus.size(); ++s)
    for (const auto& inst : expand(corpus[s], template_by_id(1), p, s)) pool.push_back(encode(inst, vocab, 40));
  std::shuffle(pool.begin(), pool.end(), rng);

  MicroProblem prob;
  prob.config.d_model = d_model;
  prob.config.n_layers = n_layers;
  prob.config.n_heads = n_heads;
  prob.config.d_ff = 2 * d_model;
  prob.config.max_len = 40;
  prob.config.vocab_size = vocab.size();
  prob.config.p = p;
  prob.config.seed = rng();
  prob.batch.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(batch_size));
  for (const auto& e : prob.batch) {
    prob.labels.push_back(e.gold_label);
    const std::string word = e.gold_label == "O" ? "none" : e.gold_label == "PERSON" ? "person"
                             : e.gold_label == "LOCATION" ? "location" : "organization";
    prob.targets.push_back(vocab.id(word));
  }
  return prob;
}

}  // namespace fixtures
