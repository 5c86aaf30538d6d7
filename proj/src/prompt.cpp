#include "contrastner/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "contrastner/error.hpp"

namespace contrastner {
namespace {

constexpr std::string_view kReservedTokens[] = {"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"};

bool is_terminal_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

bool is_bracketed(std::string_view s) {
  return s.size() >= 3 && s.front() == '[' && s.back() == ']';
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

DiscreteTemplate template_by_id(int id) {
  switch (id) {
    case 1: return {1, "<candidate_entity> is a [MASK] entity."};
    case 2: return {2, "The entity type of <candidate_entity> is [MASK]."};
    case 3: return {3, "<candidate_entity> belongs to [MASK] category."};
    case 4: return {4, "<candidate_entity> should be tagged as [MASK]."};
    default: throw ConfigError("unknown template id " + std::to_string(id) + " (expected 1-4)");
  }
}

DiscreteTemplate custom_template(std::string pattern) {
  if (count_occurrences(pattern, kCandidatePlaceholder) != 1 ||
      count_occurrences(pattern, kMaskToken) != 1) {
    throw ConfigError("template must contain <candidate_entity> and [MASK] exactly once: " + pattern);
  }
  return {0, std::move(pattern)};
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string_view piece = text.substr(i, j - i);
    i = j;

    std::size_t core_len = piece.size();
    while (core_len > 0 && is_terminal_punct(piece[core_len - 1])) --core_len;
    if (core_len == 0) {
      out.emplace_back(piece);  // all punctuation, e.g. "..." stays whole
      continue;
    }
    out.emplace_back(piece.substr(0, core_len));
    for (std::size_t k = core_len; k < piece.size(); ++k) out.emplace_back(1, piece[k]);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  auto out = split_words(text);
  for (auto& word : out) {
    if (is_bracketed(word)) continue;
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  }
  return out;
}

std::string soft_token(std::size_t slot) { return "[H" + std::to_string(slot + 1) + "]"; }

Vocabulary::Vocabulary(std::size_t soft_count) : soft_count_(soft_count) {
  for (auto t : kReservedTokens) add(std::string(t));
  for (std::size_t j = 0; j < soft_count; ++j) add(soft_token(j));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReservedCount) throw Error("vocabulary is missing reserved tokens");
  for (std::size_t i = 0; i < kReservedCount; ++i) {
    if (tokens[i] != kReservedTokens[i]) {
      throw Error("vocabulary entry " + std::to_string(i) + " should be " + std::string(kReservedTokens[i]));
    }
  }
  std::size_t soft = 0;
  while (kReservedCount + soft < tokens.size() && tokens[kReservedCount + soft] == soft_token(soft)) ++soft;
  Vocabulary vocab(soft);
  for (std::size_t i = kReservedCount + soft; i < tokens.size(); ++i) {
    if (vocab.contains(tokens[i])) throw Error("vocabulary repeats token '" + tokens[i] + "'");
    vocab.add(tokens[i]);
  }
  return vocab;
}

TokenId Vocabulary::add(const std::string& token) {
  const auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

Vocabulary build_vocab(std::span<const LabeledSentence> corpus, std::size_t min_count,
                       std::size_t p) {
  if (min_count < 1) throw ConfigError("min_count must be at least 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& sentence : corpus) {
    for (const auto& word : sentence.tokens) {
      for (auto& t : tokenize(word)) ++freq[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab(p);
  for (const auto& [token, count] : entries) {
    if (count >= min_count) vocab.add(token);
  }
  return vocab;
}

std::vector<PromptInstance> expand(const LabeledSentence& sentence, const DiscreteTemplate& tmpl,
                                   std::size_t p, std::size_t sentence_id) {
  std::string text;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    if (i) text += ' ';
    text += sentence.tokens[i];
  }
  std::string prefix = text + ' ';
  for (std::size_t j = 0; j < p; ++j) prefix += soft_token(j) + ' ';

  const auto labels = type_labels(sentence);
  const std::size_t slot = tmpl.pattern.find(kCandidatePlaceholder);

  std::vector<PromptInstance> out;
  out.reserve(sentence.tokens.size());
  for (std::size_t j = 0; j < sentence.tokens.size(); ++j) {
    std::string filled = tmpl.pattern;
    filled.replace(slot, kCandidatePlaceholder.size(), sentence.tokens[j]);
    out.push_back({sentence_id, j, prefix + filled, labels[j]});
  }
  return out;
}

EncodedInstance encode(const PromptInstance& instance, const Vocabulary& vocab,
                       std::size_t max_len) {
  const auto pieces = tokenize(instance.surface);
  const std::size_t needed = pieces.size() + 2;
  if (needed > max_len) throw OverflowError(needed, max_len);

  EncodedInstance enc;
  enc.gold_label = instance.gold_label;
  enc.sentence_id = instance.sentence_id;
  enc.candidate_index = instance.candidate_index;
  enc.ids.assign(max_len, Vocabulary::kPad);
  enc.ids[0] = Vocabulary::kCls;

  std::size_t masks = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const std::size_t pos = i + 1;
    const TokenId id = vocab.id(pieces[i]);
    enc.ids[pos] = id;
    if (id == Vocabulary::kMask) {
      enc.mask_index = pos;
      ++masks;
    } else if (vocab.is_soft(id)) {
      enc.soft_indices.push_back(pos);
    } else if (is_bracketed(pieces[i]) && pieces[i].starts_with("[H") && id == Vocabulary::kUnk) {
      throw Error("soft slot " + pieces[i] + " exceeds the vocabulary's " +
                  std::to_string(vocab.soft_count()) + " slots");
    }
  }
  enc.ids[pieces.size() + 1] = Vocabulary::kSep;
  enc.attention_len = needed;

  if (masks != 1) {
    throw Error("prompt must contain exactly one [MASK], found " + std::to_string(masks) + ": " +
                instance.surface);
  }
  for (std::size_t j = 0; j < enc.soft_indices.size(); ++j) {
    const std::size_t pos = enc.soft_indices[j];
    if (enc.ids[pos] != vocab.soft_id(j) || (j > 0 && pos != enc.soft_indices[j - 1] + 1)) {
      throw Error("soft slots must appear once each, in order and contiguous: " + instance.surface);
    }
  }
  return enc;
}

std::vector<EncodedInstance> encode_corpus(std::span<const LabeledSentence> corpus,
                                           const DiscreteTemplate& tmpl, const Vocabulary& vocab,
                                           std::size_t max_len) {
  std::vector<EncodedInstance> out;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (const auto& inst : expand(corpus[s], tmpl, vocab.soft_count(), s)) {
      out.push_back(encode(inst, vocab, max_len));
    }
  }
  return out;
}

}  // namespace contrastner
