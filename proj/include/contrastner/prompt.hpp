#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "contrastner/corpus.hpp"

namespace contrastner {

using TokenId = std::uint32_t;

inline constexpr std::string_view kCandidatePlaceholder = "<candidate_entity>";
inline constexpr std::string_view kMaskToken = "[MASK]";

// A hard prompt with one candidate slot and one mask slot. id is 1..4 for the
// built-in templates and 0 for user-supplied patterns.
struct DiscreteTemplate {
  int id = 0;
  std::string pattern;
};

// Built-in templates 1..4; throws ConfigError for any other id.
DiscreteTemplate template_by_id(int id);

// Validates that both placeholders occur exactly once.
DiscreteTemplate custom_template(std::string pattern);

// Whitespace split with trailing punctuation (. , ! ? ; :) detached into
// separate tokens; case preserved.
std::vector<std::string> split_words(std::string_view text);

// split_words, lowercased. Bracketed reserved tokens ([MASK], [H3], ...)
// keep their case.
std::vector<std::string> tokenize(std::string_view text);

// Dense token ids. Layout: [PAD] [CLS] [SEP] [MASK] [UNK], then [H1]..[Hp],
// then ordinary tokens.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kCls = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kMask = 3;
  static constexpr TokenId kUnk = 4;
  static constexpr std::size_t kReservedCount = 5;

  explicit Vocabulary(std::size_t soft_count = 0);

  // Rebuilds from an id-ordered token list (as stored in checkpoints).
  // Throws Error if the reserved prefix is malformed or tokens repeat.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  // Appends a token if absent; returns its id either way.
  TokenId add(const std::string& token);

  TokenId id(std::string_view token) const;  // kUnk if absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t soft_count() const { return soft_count_; }
  TokenId soft_id(std::size_t slot) const { return static_cast<TokenId>(kReservedCount + slot); }
  bool is_soft(TokenId id) const { return id >= kReservedCount && id < kReservedCount + soft_count_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t soft_count_ = 0;
};

std::string soft_token(std::size_t slot);  // slot 0 -> "[H1]"

// Tokens with frequency >= min_count, sorted by descending frequency then
// lexicographically, after the reserved and soft-slot entries.
Vocabulary build_vocab(std::span<const LabeledSentence> corpus, std::size_t min_count,
                       std::size_t p);

struct PromptInstance {
  std::size_t sentence_id = 0;
  std::size_t candidate_index = 0;
  std::string surface;
  std::string gold_label;
};

struct EncodedInstance {
  std::vector<TokenId> ids;
  std::size_t mask_index = 0;
  std::vector<std::size_t> soft_indices;
  std::size_t attention_len = 0;
  std::string gold_label;
  std::size_t sentence_id = 0;
  std::size_t candidate_index = 0;
};

// One prompt per word: sentence, soft slots, then the template with the word
// substituted for the candidate placeholder.
std::vector<PromptInstance> expand(const LabeledSentence& sentence, const DiscreteTemplate& tmpl,
                                   std::size_t p, std::size_t sentence_id = 0);

// [CLS] surface-tokens [SEP] padded with [PAD] to max_len. Throws
// OverflowError when the sequence does not fit.
EncodedInstance encode(const PromptInstance& instance, const Vocabulary& vocab,
                       std::size_t max_len);

// expand + encode over a whole corpus, sentence-major.
std::vector<EncodedInstance> encode_corpus(std::span<const LabeledSentence> corpus,
                                           const DiscreteTemplate& tmpl, const Vocabulary& vocab,
                                           std::size_t max_len);

}  // namespace contrastner
