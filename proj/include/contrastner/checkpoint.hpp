#pragma once

#include <string>
#include <string_view>

#include "contrastner/json_io.hpp"
#include "contrastner/train.hpp"

namespace contrastner {

inline constexpr int kCheckpointFormatVersion = 1;

// TrainConfig <-> JSON object. Missing keys keep their defaults; unknown
// keys and ill-typed values throw ConfigError naming the key.
OrderedJson config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const OrderedJson& json);
TrainConfig load_config_file(const std::string& path);

// Top-level keys, in order: format_version, config, vocab, template_id,
// label_words, params, seed, metrics.
std::string serialize_checkpoint(const Checkpoint& ckpt);

// Throws Error naming the offending key on malformed input.
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace contrastner
