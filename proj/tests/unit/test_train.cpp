#include <doctest.h>

#include <cmath>
#include <random>

#include "contrastner/error.hpp"
#include "contrastner/synthetic.hpp"
#include "contrastner/train.hpp"

using namespace contrastner;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.d_model = 4;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 8;
  cfg.max_len = 12;
  cfg.vocab_size = 9;
  cfg.p = 2;
  cfg.seed = 11;
  return cfg;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 40;
  c.p = 2;
  c.seed = 3;
  return c;
}

std::vector<double> flat(const Parameters& p) {
  std::vector<double> out;
  p.for_each([&](const std::string&, const Tensor& t) { out.insert(out.end(), t.data.begin(), t.data.end()); });
  return out;
}

Parameters random_like(const Parameters& shape, std::mt19937_64& rng) {
  Parameters g = Parameters::zeros(shape.config);
  std::normal_distribution<double> n;
  g.for_each([&](const std::string&, Tensor& t) {
    for (double& x : t.data) x = n(rng);
  });
  return g;
}

}  // namespace

TEST_CASE("label_word_for") {
  CHECK(label_word_for("PERSON", {}) == "person");
  CHECK(label_word_for("O", {}) == "none");
  CHECK(label_word_for("LOCATION", {}) == "location");
  CHECK(label_word_for("PERSON", {{"PERSON", "human"}}) == "human");
}

TEST_CASE("TrainConfig validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.tau = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.lambda = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.template_id = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.learning_rate = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.n_heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("adam first step moves each coordinate by about lr") {
  const Parameters p0 = init_params(tiny_encoder());
  std::mt19937_64 rng(1);
  const Parameters g = random_like(p0, rng);
  Parameters p = p0;
  AdamState st = AdamState::zeros_like(p);
  adam_step(p, g, st, 0.01);
  CHECK(st.t == 1);
  const auto a = flat(p0), b = flat(p), gv = flat(g);
  for (std::size_t i = 0; i < a.size(); ++i) {
    // m_hat = g, v_hat = g^2, so the step is lr * |g| / (|g| + eps).
    const double expect = 0.01 * std::abs(gv[i]) / (std::abs(gv[i]) + 1e-8);
    CHECK(std::abs(std::abs(b[i] - a[i]) - expect) <= 1e-15);
    CHECK((b[i] - a[i]) * gv[i] <= 0.0);
  }
}

TEST_CASE("adam with zero gradient leaves parameters alone") {
  Parameters p = init_params(tiny_encoder());
  const Parameters before = p;
  AdamState st = AdamState::zeros_like(p);
  const Parameters zero = Parameters::zeros(p.config);
  for (int i = 0; i < 3; ++i) adam_step(p, zero, st, 0.1);
  CHECK(p == before);
  CHECK(st.t == 3);
}

TEST_CASE("adam matches a scalar reference over several steps") {
  Parameters p = init_params(tiny_encoder());
  std::vector<double> ref = flat(p);
  std::vector<double> m(ref.size(), 0.0), v(ref.size(), 0.0);
  AdamState st = AdamState::zeros_like(p);
  std::mt19937_64 rng(2);
  for (int t = 1; t <= 6; ++t) {
    const Parameters g = random_like(p, rng);
    const auto gv = flat(g);
    adam_step(p, g, st, 3e-3);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * gv[i];
      v[i] = 0.999 * v[i] + 0.001 * gv[i] * gv[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= 3e-3 * mh / (std::sqrt(vh) + 1e-8);
    }
    const auto got = flat(p);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got[i] - ref[i]) <= 1e-12);
  }
}

TEST_CASE("adam rejects non-finite gradients untouched") {
  Parameters p = init_params(tiny_encoder());
  const Parameters before = p;
  AdamState st = AdamState::zeros_like(p);
  Parameters g = Parameters::zeros(p.config);
  g.head_b.data[0] = NAN;
  CHECK_THROWS_AS(adam_step(p, g, st, 0.1), NumericError);
  CHECK(p == before);
  CHECK(st.t == 0);
}

TEST_CASE("make_batches") {
  auto sizes = [](const auto& batches) {
    std::vector<std::size_t> s;
    for (const auto& b : batches) s.push_back(b.size());
    return s;
  };
  CHECK(sizes(make_batches(70, 32, 0, 0)) == std::vector<std::size_t>{32, 32, 6});
  CHECK(sizes(make_batches(33, 32, 0, 0)) == std::vector<std::size_t>{33});
  CHECK(sizes(make_batches(65, 32, 0, 0)) == std::vector<std::size_t>{32, 33});
  CHECK(sizes(make_batches(2, 32, 0, 0)) == std::vector<std::size_t>{2});
  CHECK_THROWS_AS(make_batches(1, 32, 0, 0), Error);
  CHECK_THROWS_AS(make_batches(10, 1, 0, 0), ConfigError);

  CHECK(make_batches(70, 8, 5, 2) == make_batches(70, 8, 5, 2));
  CHECK(make_batches(70, 8, 5, 2) != make_batches(70, 8, 5, 3));
  CHECK(make_batches(70, 8, 5, 2) != make_batches(70, 8, 6, 2));

  auto all = make_batches(70, 8, 5, 2);
  std::vector<std::size_t> seen;
  for (const auto& b : all) seen.insert(seen.end(), b.begin(), b.end());
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < 70; ++i) CHECK(seen[i] == i);
}

TEST_CASE("training_vocab adds template and label words") {
  const auto corpus = gazetteer_corpus(4, 1);
  std::map<std::string, std::string> words;
  TrainConfig c = small_config();
  c.template_id = 2;
  const Vocabulary v = training_vocab(corpus, c, words);
  for (auto w : {"the", "entity", "type", "of", "is", "."}) CHECK(v.contains(w));
  CHECK(words.at("O") == "none");
  CHECK(v.contains("none"));

  c.label_words = {{"PERSON", "Two Words"}};
  CHECK_THROWS_AS(training_vocab(corpus, c, words), ConfigError);
  c.label_words = {{"PERSON", "none"}};
  CHECK_THROWS_AS(training_vocab(corpus, c, words), ConfigError);
}

TEST_CASE("train with zero epochs returns the initial parameters") {
  TrainConfig c = small_config();
  c.epochs = 0;
  const auto corpus = gazetteer_corpus(5, 2);
  const Checkpoint ck = train(c, corpus);
  CHECK(ck.params == init_params(c.encoder_config(ck.vocab.size())));
  CHECK(ck.metrics.steps == 0);
  CHECK(ck.metrics.epoch_loss.empty());
  CHECK(ck.metrics.instances > 0);
  CHECK_NOTHROW(ck.check_consistency());
}

TEST_CASE("lambda = 0 trains on cross-entropy alone") {
  const auto corpus = gazetteer_corpus(6, 3);
  TrainConfig c = small_config();
  c.lambda = 0.0;
  const Checkpoint a = train(c, corpus);
  for (std::size_t e = 0; e < c.epochs; ++e) {
    CHECK(a.metrics.epoch_loss[e] == a.metrics.epoch_cross_entropy[e]);
    CHECK(a.metrics.epoch_contrastive[e] == 0.0);
  }
  // Temperature only enters through the contrastive term.
  c.tau = 0.3;
  const Checkpoint b = train(c, corpus);
  CHECK(a.params == b.params);
}

TEST_CASE("lambda = 1 trains on the contrastive term alone") {
  const auto corpus = gazetteer_corpus(6, 3);
  TrainConfig c = small_config();
  c.lambda = 1.0;
  c.epochs = 1;
  const Checkpoint ck = train(c, corpus);
  const Parameters init = init_params(c.encoder_config(ck.vocab.size()));
  CHECK(ck.params.soft_prompt.data != init.soft_prompt.data);
  // The head only feeds the cross-entropy term.
  CHECK(ck.params.head_w.data == init.head_w.data);
  CHECK(ck.params.head_b.data == init.head_b.data);
  for (std::size_t e = 0; e < c.epochs; ++e) CHECK(ck.metrics.epoch_cross_entropy[e] == 0.0);
}

TEST_CASE("freeze_soft keeps the soft bank fixed") {
  const auto corpus = gazetteer_corpus(6, 3);
  TrainConfig c = small_config();
  c.freeze_soft = true;
  const Checkpoint ck = train(c, corpus);
  const Parameters init = init_params(c.encoder_config(ck.vocab.size()));
  CHECK(ck.params.soft_prompt.data == init.soft_prompt.data);
  CHECK(ck.params.word_emb.data != init.word_emb.data);
}

TEST_CASE("training lowers the loss and is reproducible") {
  const auto corpus = gazetteer_corpus(12, 4);
  TrainConfig c = small_config();
  c.epochs = 8;
  std::vector<std::size_t> epochs_seen;
  const Checkpoint a = train(c, corpus, [&](const EpochReport& r) { epochs_seen.push_back(r.epoch); });
  CHECK(epochs_seen == std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(a.metrics.epoch_loss.back() < a.metrics.epoch_loss.front());
  const Checkpoint b = train(c, corpus);
  CHECK(a.params == b.params);
  CHECK(a.metrics == b.metrics);
  CHECK(a.vocab == b.vocab);

  c.seed = 4;
  const Checkpoint other = train(c, corpus);
  CHECK(!(other.params == a.params));
}

TEST_CASE("gradient clipping bounds the first update") {
  const auto corpus = gazetteer_corpus(6, 3);
  TrainConfig c = small_config();
  c.epochs = 1;
  c.clip_norm = 1e-3;
  // With Adam the direction is normalized, so clipping mainly shows up as a
  // different trajectory rather than a smaller step.
  const Checkpoint clipped = train(c, corpus);
  c.clip_norm = 0.0;
  const Checkpoint free = train(c, corpus);
  CHECK(!(clipped.params == free.params));
}

TEST_CASE("check_consistency catches mismatches") {
  const auto corpus = gazetteer_corpus(4, 1);
  TrainConfig c = small_config();
  c.epochs = 0;
  Checkpoint ck = train(c, corpus);
  auto bad = ck;
  bad.template_id = 3;
  CHECK_THROWS_AS(bad.check_consistency(), Error);
  bad = ck;
  bad.config.p = 3;
  CHECK_THROWS_AS(bad.check_consistency(), Error);
  bad = ck;
  bad.label_words["PERSON"] = "zzz";
  CHECK_THROWS_AS(bad.check_consistency(), Error);
}
