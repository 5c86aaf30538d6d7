#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "contrastner/corpus.hpp"
#include "contrastner/error.hpp"
#include "contrastner/prompt.hpp"
#include "contrastner/synthetic.hpp"

using namespace contrastner;

namespace {

LabeledSentence steve_jobs() {
  return {{"Steve", "Jobs", "was", "born", "in", "America"},
          {"B-PER", "I-PER", "O", "O", "O", "B-LOC"}};
}

}  // namespace

TEST_CASE("built-in templates") {
  CHECK(template_by_id(1).pattern == "<candidate_entity> is a [MASK] entity.");
  CHECK(template_by_id(2).pattern == "The entity type of <candidate_entity> is [MASK].");
  CHECK(template_by_id(3).pattern == "<candidate_entity> belongs to [MASK] category.");
  CHECK(template_by_id(4).pattern == "<candidate_entity> should be tagged as [MASK].");
  CHECK_THROWS_AS(template_by_id(0), ConfigError);
  CHECK_THROWS_AS(template_by_id(5), ConfigError);

  CHECK(custom_template("<candidate_entity> means [MASK]").id == 0);
  CHECK_THROWS_AS(custom_template("<candidate_entity> [MASK] [MASK]"), ConfigError);
  CHECK_THROWS_AS(custom_template("no slots here"), ConfigError);
}

TEST_CASE("tokenize") {
  CHECK(tokenize("Steve is a [MASK] entity.") ==
        std::vector<std::string>{"steve", "is", "a", "[MASK]", "entity", "."});
  CHECK(tokenize("is [MASK].") == std::vector<std::string>{"is", "[MASK]", "."});
  CHECK(tokenize("x [H1] [H2] ...") == std::vector<std::string>{"x", "[H1]", "[H2]", "..."});
  CHECK(tokenize("  U.S.  ") == std::vector<std::string>{"u.s", "."});
  CHECK(split_words("Hello, World!") == std::vector<std::string>{"Hello", ",", "World", "!"});
}

TEST_CASE("build_vocab") {
  const std::vector<LabeledSentence> corpus = {{{"a", "a", "b"}, {"O", "O", "O"}}};
  const auto v = build_vocab(corpus, 2, 2);
  CHECK(v.contains("a"));
  CHECK_FALSE(v.contains("b"));
  CHECK(v.size() == 5 + 2 + 1);
  CHECK(v.token(Vocabulary::kMask) == "[MASK]");
  CHECK(v.token(v.soft_id(0)) == "[H1]");
  CHECK(v.token(v.soft_id(1)) == "[H2]");
  CHECK(build_vocab(corpus, 2, 2) == v);
  CHECK_THROWS_AS(build_vocab(corpus, 0, 2), ConfigError);

  SUBCASE("frequency order, ties lexicographic") {
    const std::vector<LabeledSentence> c = {{{"b", "c", "c", "a", "B"}, {"O", "O", "O", "O", "O"}}};
    const auto w = build_vocab(c, 1, 0);
    CHECK(w.tokens() == std::vector<std::string>{"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]", "b", "c", "a"});
  }
  SUBCASE("10-sentence fixture") {
    std::ifstream in(std::string(CONTRASTNER_TEST_DATA) + "/fixture10.conll");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto fixture = parse_conll(ss.str(), 0, 3);
    // 60 distinct lowercased tokens, counted independently with a script.
    CHECK(build_vocab(fixture, 1, 4).size() == 5 + 4 + 60);
  }
}

TEST_CASE("Vocabulary::from_tokens round-trips and validates") {
  const std::vector<LabeledSentence> corpus = {{{"x", "y"}, {"O", "O"}}};
  const auto v = build_vocab(corpus, 1, 3);
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);
  CHECK(Vocabulary::from_tokens(v.tokens()).soft_count() == 3);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"[PAD]", "[CLS]"}), Error);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]", "x", "x"}), Error);
}

TEST_CASE("expand reproduces the soft-hard prompt table") {
  const auto instances = expand(steve_jobs(), template_by_id(1), 2);
  REQUIRE(instances.size() == 6);
  const char* words[] = {"Steve", "Jobs", "was", "born", "in", "America"};
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(instances[j].surface ==
          std::string("Steve Jobs was born in America [H1] [H2] ") + words[j] + " is a [MASK] entity.");
    CHECK(instances[j].candidate_index == j);
  }
  CHECK(instances[0].gold_label == "PERSON");
  CHECK(instances[2].gold_label == "O");
  CHECK(instances[5].gold_label == "LOCATION");

  CHECK(expand({{"Paris"}, {"LOCATION"}}, template_by_id(3), 4).size() == 1);
  CHECK(expand(steve_jobs(), template_by_id(1), 0)[0].surface ==
        "Steve Jobs was born in America Steve is a [MASK] entity.");
}

TEST_CASE("encode") {
  const auto instances = expand(steve_jobs(), template_by_id(1), 2);
  std::vector<LabeledSentence> corpus{steve_jobs()};
  Vocabulary vocab = build_vocab(corpus, 1, 2);
  for (auto w : {"is", "a", "entity", "."}) vocab.add(w);

  const auto enc = encode(instances[0], vocab, 32);
  // [CLS] + 6 words + 2 soft + "steve is a [MASK] entity ." + [SEP]
  CHECK(enc.attention_len == 16);
  CHECK(enc.ids.size() == 32);
  CHECK(enc.ids[0] == Vocabulary::kCls);
  CHECK(enc.ids[15] == Vocabulary::kSep);
  CHECK(enc.ids[16] == Vocabulary::kPad);
  CHECK(enc.soft_indices == std::vector<std::size_t>{7, 8});
  CHECK(enc.mask_index == 12);
  CHECK(enc.ids[enc.mask_index] == Vocabulary::kMask);
  CHECK(enc.ids[9] == vocab.id("steve"));

  SUBCASE("unknown tokens map to [UNK]") {
    Vocabulary small(2);
    const auto e = encode(instances[0], small, 32);
    CHECK(e.ids[1] == Vocabulary::kUnk);
    CHECK(e.mask_index == 12);
  }
  SUBCASE("exact fit and overflow") {
    CHECK(encode(instances[0], vocab, 16).attention_len == 16);
    try {
      encode(instances[0], vocab, 15);
      FAIL("expected overflow");
    } catch (const OverflowError& e) {
      CHECK(e.needed() == 16);
    }
  }
  SUBCASE("soft slots beyond the vocabulary are rejected") {
    Vocabulary one(1);
    CHECK_THROWS_AS(encode(instances[0], one, 32), Error);
  }
}

TEST_CASE("expand/encode invariants over random sentences and templates") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto corpus = gazetteer_corpus(4, rng());
    const std::size_t p = rng() % 6;
    const auto tmpl = template_by_id(1 + static_cast<int>(rng() % 4));
    Vocabulary vocab = build_vocab(corpus, 1, p);
    for (const auto& s : corpus) {
      const auto inst = expand(s, tmpl, p);
      CHECK(inst.size() == s.tokens.size());
      std::set<std::string> surfaces;
      std::set<std::string> words(s.tokens.begin(), s.tokens.end());
      for (const auto& i : inst) surfaces.insert(i.surface);
      CHECK(surfaces.size() == words.size());
      for (const auto& i : inst) {
        const auto e = encode(i, vocab, 64);
        CHECK(std::count(e.ids.begin(), e.ids.end(), Vocabulary::kMask) == 1);
        CHECK(e.soft_indices.size() == p);
        for (std::size_t j = 0; j < p; ++j) CHECK(e.ids[e.soft_indices[j]] == vocab.soft_id(j));
        const auto again = encode(i, vocab, 64);
        CHECK(again.ids == e.ids);
      }
    }
  }
}
