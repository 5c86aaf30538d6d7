#include "contrastner/synthetic.hpp"

#include <sstream>
#include <string>
#include <string_view>

#include "contrastner/rng.hpp"

namespace contrastner {
namespace {

constexpr std::string_view kFirstNames[] = {"Steve", "Maria", "John",  "Aisha", "Carlos", "Wei",
                                            "Olga",  "Pierre", "Fatima", "Kenji", "Laura", "Omar"};
constexpr std::string_view kLastNames[] = {"Jobs",   "Garcia", "Smith", "Khan",   "Mendez", "Chen",
                                           "Petrova", "Dubois", "Ali",  "Tanaka", "Rossi",  "Haddad"};
constexpr std::string_view kLocations[] = {"America", "Paris",   "Tokyo",        "Berlin",
                                           "Cairo",   "Lima",    "Toronto",      "Madrid",
                                           "Sydney",  "Mumbai",  "New York",     "Hong Kong",
                                           "Buenos Aires", "San Francisco"};
constexpr std::string_view kOrganizations[] = {"Google", "Siemens", "UNICEF",         "Toyota",
                                               "NASA",   "Reuters", "Nokia",          "Airbus",
                                               "Samsung", "General Motors", "Red Cross", "World Bank"};

// Slots are written {PER}, {LOC}, {ORG}; everything else is an O token.
constexpr std::string_view kFrames[] = {
    "{PER} was born in {LOC} .",
    "{PER} works for {ORG} .",
    "{ORG} opened an office in {LOC} .",
    "{PER} visited {LOC} last year .",
    "{PER} met {PER} in {LOC} .",
    "the report from {ORG} was praised by {PER} .",
    "{ORG} hired {PER} as a consultant .",
    "officials in {LOC} welcomed {ORG} .",
    "it rained heavily on monday .",
    "{PER} said the deal with {ORG} is final .",
    "shares of {ORG} rose sharply .",
    "the museum in {LOC} reopened after repairs .",
};

template <std::size_t N>
std::string_view pick(Rng& rng, const std::string_view (&items)[N]) {
  return items[rng.below(N)];
}

void append_entity(LabeledSentence& s, std::string_view text, std::string_view type) {
  std::istringstream words{std::string(text)};
  std::string w;
  bool first = true;
  while (words >> w) {
    s.tokens.push_back(w);
    s.tags.push_back((first ? "B-" : "I-") + std::string(type));
    first = false;
  }
}

}  // namespace

std::vector<LabeledSentence> gazetteer_corpus(std::size_t count, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 7));
  std::vector<LabeledSentence> corpus;
  corpus.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    LabeledSentence s;
    std::istringstream frame{std::string(pick(rng, kFrames))};
    std::string piece;
    while (frame >> piece) {
      if (piece == "{PER}") {
        std::string name(pick(rng, kFirstNames));
        if (rng.below(2) == 0) name += " " + std::string(pick(rng, kLastNames));
        append_entity(s, name, "PER");
      } else if (piece == "{LOC}") {
        append_entity(s, pick(rng, kLocations), "LOC");
      } else if (piece == "{ORG}") {
        append_entity(s, pick(rng, kOrganizations), "ORG");
      } else {
        s.tokens.push_back(piece);
        s.tags.emplace_back(kOutsideTag);
      }
    }
    corpus.push_back(std::move(s));
  }
  return corpus;
}

ToySplit toy_split(std::uint64_t seed, std::size_t train_count, std::size_t test_count) {
  auto all = gazetteer_corpus(train_count + test_count, seed);
  ToySplit split;
  split.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(train_count));
  split.test.assign(all.begin() + static_cast<std::ptrdiff_t>(train_count), all.end());
  return split;
}

}  // namespace contrastner
