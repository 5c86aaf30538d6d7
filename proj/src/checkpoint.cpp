#include "contrastner/checkpoint.hpp"

#include <limits>
#include <set>

#include "contrastner/error.hpp"

namespace contrastner {
namespace {

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "epochs",  "batch_size", "learning_rate", "tau",       "lambda",    "template_id",
      "p",       "d_model",    "n_layers",      "n_heads",   "d_ff",      "max_len",
      "min_count", "seed",     "label_words",   "clip_norm", "freeze_soft"};
  return keys;
}

template <typename T>
void read_unsigned(const OrderedJson& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
  }
  const auto raw = v.get<std::uint64_t>();
  if (raw > std::numeric_limits<T>::max()) throw ConfigError(std::string("config key '") + key + "' is too large");
  out = static_cast<T>(raw);
}

void read_double(const OrderedJson& j, const char* key, double& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
  out = j.at(key).get<double>();
}

const OrderedJson& require(const OrderedJson& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw Error("checkpoint: missing key '" + path + key + "'");
  return j.at(key);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
  throw Error("checkpoint: invalid key '" + key + "' (" + what + ")");
}

Checkpoint parse_checkpoint_impl(std::string_view text);

}  // namespace

OrderedJson config_to_json(const TrainConfig& c) {
  OrderedJson j = OrderedJson::object();
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["tau"] = c.tau;
  j["lambda"] = c.lambda;
  j["template_id"] = c.template_id;
  j["p"] = c.p;
  j["d_model"] = c.d_model;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_ff"] = c.d_ff;
  j["max_len"] = c.max_len;
  j["min_count"] = c.min_count;
  j["seed"] = c.seed;
  OrderedJson words = OrderedJson::object();
  for (const auto& [type, word] : c.label_words) words[type] = word;
  j["label_words"] = words;
  j["clip_norm"] = c.clip_norm;
  j["freeze_soft"] = c.freeze_soft;
  return j;
}

TrainConfig config_from_json(const OrderedJson& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known_config_keys().contains(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");
  }
  TrainConfig c;
  read_unsigned(j, "epochs", c.epochs);
  read_unsigned(j, "batch_size", c.batch_size);
  read_double(j, "learning_rate", c.learning_rate);
  read_double(j, "tau", c.tau);
  read_double(j, "lambda", c.lambda);
  read_unsigned(j, "template_id", c.template_id);
  read_unsigned(j, "p", c.p);
  read_unsigned(j, "d_model", c.d_model);
  read_unsigned(j, "n_layers", c.n_layers);
  read_unsigned(j, "n_heads", c.n_heads);
  read_unsigned(j, "d_ff", c.d_ff);
  read_unsigned(j, "max_len", c.max_len);
  read_unsigned(j, "min_count", c.min_count);
  read_unsigned(j, "seed", c.seed);
  read_double(j, "clip_norm", c.clip_norm);
  if (j.contains("freeze_soft")) {
    if (!j.at("freeze_soft").is_boolean()) throw ConfigError("config key 'freeze_soft' must be a boolean");
    c.freeze_soft = j.at("freeze_soft").get<bool>();
  }
  if (j.contains("label_words")) {
    const auto& lw = j.at("label_words");
    if (!lw.is_object()) throw ConfigError("config key 'label_words' must be an object");
    for (auto it = lw.begin(); it != lw.end(); ++it) {
      if (!it.value().is_string()) throw ConfigError("label_words." + it.key() + " must be a string");
      c.label_words[it.key()] = it.value().get<std::string>();
    }
  }
  c.validate();
  return c;
}

TrainConfig load_config_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return config_from_json(parse_json(text, path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  OrderedJson j = OrderedJson::object();
  j["format_version"] = kCheckpointFormatVersion;
  j["config"] = config_to_json(ckpt.config);
  j["vocab"] = ckpt.vocab.tokens();
  j["template_id"] = ckpt.template_id;
  OrderedJson words = OrderedJson::object();
  for (const auto& [type, word] : ckpt.label_words) words[type] = word;
  j["label_words"] = words;
  OrderedJson params = OrderedJson::object();
  ckpt.params.for_each([&](const std::string& name, const Tensor& t) {
    OrderedJson entry = OrderedJson::object();
    entry["shape"] = t.shape;
    entry["data"] = t.data;
    params[name] = std::move(entry);
  });
  j["params"] = std::move(params);
  j["seed"] = ckpt.seed;
  OrderedJson metrics = OrderedJson::object();
  metrics["epoch_loss"] = ckpt.metrics.epoch_loss;
  metrics["epoch_contrastive"] = ckpt.metrics.epoch_contrastive;
  metrics["epoch_cross_entropy"] = ckpt.metrics.epoch_cross_entropy;
  metrics["instances"] = ckpt.metrics.instances;
  metrics["steps"] = ckpt.metrics.steps;
  j["metrics"] = std::move(metrics);
  return dump_json(j) + "\n";
}

namespace {

Checkpoint parse_checkpoint_impl(std::string_view text) {
  const OrderedJson j = parse_json(text, "checkpoint");
  if (!j.is_object()) throw Error("checkpoint: top level must be an object");

  const auto& version = require(j, "format_version", "");
  if (!version.is_number_integer() || version.get<int>() != kCheckpointFormatVersion) {
    bad_key("format_version", "expected 1");
  }

  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json(require(j, "config", ""));
  } catch (const ConfigError& e) {
    bad_key("config", e.what());
  }

  const auto& vocab = require(j, "vocab", "");
  if (!vocab.is_array()) bad_key("vocab", "expected an array of strings");
  std::vector<std::string> tokens;
  for (const auto& t : vocab) {
    if (!t.is_string()) bad_key("vocab", "expected an array of strings");
    tokens.push_back(t.get<std::string>());
  }
  try {
    ckpt.vocab = Vocabulary::from_tokens(std::move(tokens));
  } catch (const Error& e) {
    bad_key("vocab", e.what());
  }

  const auto& tid = require(j, "template_id", "");
  if (!tid.is_number_integer()) bad_key("template_id", "expected an integer");
  ckpt.template_id = tid.get<int>();
  try {
    template_by_id(ckpt.template_id);
  } catch (const ConfigError& e) {
    bad_key("template_id", e.what());
  }

  const auto& words = require(j, "label_words", "");
  if (!words.is_object()) bad_key("label_words", "expected an object");
  for (auto it = words.begin(); it != words.end(); ++it) {
    if (!it.value().is_string()) bad_key("label_words." + it.key(), "expected a string");
    ckpt.label_words[it.key()] = it.value().get<std::string>();
  }

  const auto& params = require(j, "params", "");
  if (!params.is_object()) bad_key("params", "expected an object");
  ckpt.params = Parameters::zeros(ckpt.config.encoder_config(ckpt.vocab.size()));
  std::size_t expected_tensors = 0;
  ckpt.params.for_each([&](const std::string& name, Tensor& t) {
    ++expected_tensors;
    const std::string key = "params." + name;
    const auto& entry = require(params, name, "params.");
    const auto& shape = require(entry, "shape", key + ".");
    const auto& data = require(entry, "data", key + ".");
    if (!shape.is_array() || !data.is_array()) bad_key(key, "shape and data must be arrays");
    std::vector<std::size_t> dims;
    for (const auto& s : shape) {
      if (!s.is_number_unsigned()) bad_key(key + ".shape", "expected non-negative integers");
      dims.push_back(s.get<std::size_t>());
    }
    if (dims != t.shape) bad_key(key + ".shape", "does not match the config");
    if (data.size() != t.size()) bad_key(key + ".data", "length does not match the shape");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!data[i].is_number()) bad_key(key + ".data", "expected numbers");
      t.data[i] = data[i].get<double>();
    }
  });
  if (params.size() != expected_tensors) bad_key("params", "unexpected extra tensors");

  const auto& seed = require(j, "seed", "");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    bad_key("seed", "expected a non-negative integer");
  }
  ckpt.seed = seed.get<std::uint64_t>();

  const auto& metrics = require(j, "metrics", "");
  if (!metrics.is_object()) bad_key("metrics", "expected an object");
  auto read_series = [&](const char* key, std::vector<double>& out) {
    if (!metrics.contains(key)) return;
    const auto& arr = metrics.at(key);
    if (!arr.is_array()) bad_key(std::string("metrics.") + key, "expected an array");
    for (const auto& x : arr) {
      if (!x.is_number()) bad_key(std::string("metrics.") + key, "expected numbers");
      out.push_back(x.get<double>());
    }
  };
  read_series("epoch_loss", ckpt.metrics.epoch_loss);
  read_series("epoch_contrastive", ckpt.metrics.epoch_contrastive);
  read_series("epoch_cross_entropy", ckpt.metrics.epoch_cross_entropy);
  if (metrics.contains("instances")) ckpt.metrics.instances = metrics.at("instances").get<std::size_t>();
  if (metrics.contains("steps")) ckpt.metrics.steps = metrics.at("steps").get<std::size_t>();

  ckpt.check_consistency();
  return ckpt;
}

}  // namespace

Checkpoint parse_checkpoint(std::string_view text) {
  try {
    return parse_checkpoint_impl(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_checkpoint(text);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace contrastner
