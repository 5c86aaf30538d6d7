#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace contrastner {

// A tokenized sentence with one tag per token. Tags are either BIO
// ("B-PER", "I-PER", "O") or collapsed per-word types ("PERSON", "O").
struct LabeledSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  bool operator==(const LabeledSentence&) const = default;
};

// Half-open token range [start, end) carrying one entity type.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string entity_type;

  bool operator==(const EntitySpan&) const = default;
  auto operator<=>(const EntitySpan&) const = default;
};

struct FewShotSpec {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t splits = 1;
};

enum class TagScheme { kOutside, kBio, kCollapsed };

using TypeMap = std::map<std::string, std::string>;

inline constexpr std::size_t kLastColumn = std::numeric_limits<std::size_t>::max();
inline constexpr std::string_view kOutsideTag = "O";

// PER/LOC/ORG/MISC -> PERSON/LOCATION/ORGANIZATION/MISCELLANEOUS.
const TypeMap& default_type_map();

// Parses whitespace-separated column text. Blank lines end sentences and
// "-DOCSTART-" lines are dropped. kLastColumn selects each line's final
// column. Throws ParseError on short lines or mixed tag schemes.
std::vector<LabeledSentence> parse_conll(std::string_view text, std::size_t token_column,
                                         std::size_t tag_column);

// Reads a file and parses it; throws Error naming the path if unreadable.
std::vector<LabeledSentence> read_conll_file(const std::string& path,
                                             std::size_t token_column = 0,
                                             std::size_t tag_column = kLastColumn);

// Two-column "token tag" text, one blank line after each sentence.
std::string to_conll(std::span<const LabeledSentence> sentences);

TagScheme tag_scheme(const LabeledSentence& sentence);

// B-X/I-X -> type_map[X]. Throws Error if a type is unmapped or a tag is not BIO.
LabeledSentence collapse_bio(const LabeledSentence& sentence, const TypeMap& type_map);

// Per-token entity types for either scheme. BIO types missing from the map
// pass through unchanged; collapsed tags are returned as-is.
std::vector<std::string> type_labels(const LabeledSentence& sentence,
                                     const TypeMap& type_map = default_type_map());

// Lenient BIO: a stray I-X opens a span. Collapsed tags: maximal runs of the
// same non-O type.
std::vector<EntitySpan> extract_spans(const LabeledSentence& sentence);
std::vector<EntitySpan> spans_from_labels(std::span<const std::string> labels);

// Indices (ascending) of the sentences picked for one K-shot episode.
std::vector<std::size_t> sample_k_shot_indices(std::span<const LabeledSentence> corpus,
                                               const FewShotSpec& spec, std::size_t split_index);

std::vector<LabeledSentence> sample_k_shot(std::span<const LabeledSentence> corpus,
                                           const FewShotSpec& spec, std::size_t split_index);

// Total mentions per entity type (span-level).
std::map<std::string, std::size_t> mention_counts(std::span<const LabeledSentence> corpus);

}  // namespace contrastner
