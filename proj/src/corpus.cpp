#include "contrastner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "contrastner/error.hpp"
#include "contrastner/rng.hpp"

namespace contrastner {
namespace {

bool is_bio_tag(std::string_view tag) {
  return tag.size() >= 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

const TypeMap& default_type_map() {
  static const TypeMap map = {
      {"PER", "PERSON"},
      {"LOC", "LOCATION"},
      {"ORG", "ORGANIZATION"},
      {"MISC", "MISCELLANEOUS"},
  };
  return map;
}

std::vector<LabeledSentence> parse_conll(std::string_view text, std::size_t token_column,
                                         std::size_t tag_column) {
  std::vector<LabeledSentence> sentences;
  LabeledSentence current;
  bool saw_bio = false;
  bool saw_bare = false;

  auto flush = [&] {
    if (!current.tokens.empty()) sentences.push_back(std::move(current));
    current = {};
    saw_bio = saw_bare = false;
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const auto cols = split_ws(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols.front().starts_with("-DOCSTART-")) continue;

    const std::size_t tag_idx = tag_column == kLastColumn ? cols.size() - 1 : tag_column;
    const std::size_t needed = std::max(token_column, tag_idx) + 1;
    if (cols.size() < needed || (tag_column == kLastColumn && cols.size() < 2)) {
      throw ParseError(line_no, "expected at least " + std::to_string(std::max<std::size_t>(needed, 2)) +
                                    " columns, found " + std::to_string(cols.size()));
    }

    const std::string_view tag = cols[tag_idx];
    if (tag == "B-" || tag == "I-") throw ParseError(line_no, "tag '" + std::string(tag) + "' has no type");
    if (tag != kOutsideTag) {
      (is_bio_tag(tag) ? saw_bio : saw_bare) = true;
      if (saw_bio && saw_bare) {
        throw ParseError(line_no, "sentence mixes BIO and bare tags (at '" + std::string(tag) + "')");
      }
    }
    current.tokens.emplace_back(cols[token_column]);
    current.tags.emplace_back(tag);
  }
  flush();
  return sentences;
}

std::vector<LabeledSentence> read_conll_file(const std::string& path, std::size_t token_column,
                                             std::size_t tag_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read data file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_conll(buf.str(), token_column, tag_column);
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string to_conll(std::span<const LabeledSentence> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i];
      out += ' ';
      out += s.tags[i];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

TagScheme tag_scheme(const LabeledSentence& sentence) {
  for (const auto& tag : sentence.tags) {
    if (tag == kOutsideTag) continue;
    return is_bio_tag(tag) ? TagScheme::kBio : TagScheme::kCollapsed;
  }
  return TagScheme::kOutside;
}

LabeledSentence collapse_bio(const LabeledSentence& sentence, const TypeMap& type_map) {
  LabeledSentence out{sentence.tokens, {}};
  out.tags.reserve(sentence.tags.size());
  for (const auto& tag : sentence.tags) {
    if (tag == kOutsideTag) {
      out.tags.push_back(tag);
      continue;
    }
    if (!is_bio_tag(tag)) throw Error("collapse_bio: tag '" + tag + "' is not in BIO form");
    const std::string type = tag.substr(2);
    const auto it = type_map.find(type);
    if (it == type_map.end()) throw Error("collapse_bio: no display type for BIO type '" + type + "'");
    out.tags.push_back(it->second);
  }
  return out;
}

std::vector<std::string> type_labels(const LabeledSentence& sentence, const TypeMap& type_map) {
  std::vector<std::string> labels;
  labels.reserve(sentence.tags.size());
  for (const auto& tag : sentence.tags) {
    if (!is_bio_tag(tag)) {
      labels.push_back(tag);
      continue;
    }
    const std::string type = tag.substr(2);
    const auto it = type_map.find(type);
    labels.push_back(it == type_map.end() ? type : it->second);
  }
  return labels;
}

std::vector<EntitySpan> spans_from_labels(std::span<const std::string> labels) {
  // Works for both schemes: B-X always opens, I-X and bare X continue a
  // same-type span or open a new one.
  std::vector<EntitySpan> spans;
  std::string open_type;
  std::size_t open_start = 0;
  bool open = false;

  auto close = [&](std::size_t end) {
    if (open) spans.push_back({open_start, end, open_type});
    open = false;
  };

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string& tag = labels[i];
    if (tag == kOutsideTag) {
      close(i);
      continue;
    }
    const bool bio = is_bio_tag(tag);
    const std::string type = bio ? tag.substr(2) : tag;
    const bool begins = bio && tag[0] == 'B';
    if (open && !begins && type == open_type) continue;
    close(i);
    open = true;
    open_start = i;
    open_type = type;
  }
  close(labels.size());
  return spans;
}

std::vector<EntitySpan> extract_spans(const LabeledSentence& sentence) {
  return spans_from_labels(sentence.tags);
}

std::map<std::string, std::size_t> mention_counts(std::span<const LabeledSentence> corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus) {
    for (const auto& span : extract_spans(s)) ++counts[span.entity_type];
  }
  return counts;
}

std::vector<std::size_t> sample_k_shot_indices(std::span<const LabeledSentence> corpus,
                                               const FewShotSpec& spec, std::size_t split_index) {
  if (corpus.empty()) throw Error("sample_k_shot: corpus is empty");
  if (spec.k < 1) throw ConfigError("sample_k_shot: k must be at least 1");
  if (spec.splits < 1) throw ConfigError("sample_k_shot: splits must be at least 1");
  if (split_index >= spec.splits) {
    throw ConfigError("sample_k_shot: split index " + std::to_string(split_index) +
                      " out of range for " + std::to_string(spec.splits) + " splits");
  }

  std::vector<std::map<std::string, std::size_t>> per_sentence(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& span : extract_spans(corpus[i])) ++per_sentence[i][span.entity_type];
  }

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(spec.seed, split_index));
  rng.shuffle(std::span(order));

  std::map<std::string, std::size_t> filled;
  std::vector<std::size_t> chosen;
  for (const std::size_t idx : order) {
    const auto& counts = per_sentence[idx];
    const bool useful = std::any_of(counts.begin(), counts.end(),
                                    [&](const auto& kv) { return filled[kv.first] < spec.k; });
    if (!useful) continue;
    chosen.push_back(idx);
    for (const auto& [type, n] : counts) filled[type] += n;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<LabeledSentence> sample_k_shot(std::span<const LabeledSentence> corpus,
                                           const FewShotSpec& spec, std::size_t split_index) {
  std::vector<LabeledSentence> out;
  for (const std::size_t idx : sample_k_shot_indices(corpus, spec, split_index)) {
    out.push_back(corpus[idx]);
  }
  return out;
}

}  // namespace contrastner
