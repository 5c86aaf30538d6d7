#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace contrastner {

using OrderedJson = nlohmann::ordered_json;

// Single-line JSON with ", " and ": " separators, insertion-ordered keys and
// shortest round-trip decimals. Integral doubles keep a trailing ".0" so
// they re-parse as floats. Throws NumericError for NaN or infinity.
std::string dump_json(const OrderedJson& value);

// Strict parse; throws Error (prefixed with context) on malformed input.
OrderedJson parse_json(std::string_view text, const std::string& context);

std::string read_text_file(const std::string& path);

// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace contrastner
