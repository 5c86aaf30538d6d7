#include "contrastner/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "contrastner/checkpoint.hpp"
#include "contrastner/error.hpp"
#include "contrastner/infer.hpp"
#include "contrastner/synthetic.hpp"

namespace contrastner {
namespace {

struct DataColumns {
  std::size_t token = 0;
  long tag = -1;  // -1: last column

  std::vector<LabeledSentence> read(const std::string& path) const {
    return read_conll_file(path, token, tag < 0 ? kLastColumn : static_cast<std::size_t>(tag));
  }
};

void add_column_flags(CLI::App* cmd, DataColumns& cols) {
  cmd->add_option("--token-column", cols.token, "Column holding the token")->capture_default_str();
  cmd->add_option("--tag-column", cols.tag, "Column holding the tag (-1 = last)")->capture_default_str();
}

std::vector<int> parse_template_list(const std::string& text) {
  std::vector<int> ids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int id = 0;
    try {
      id = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("invalid template id '" + item + "'");
    }
    if (used != item.size()) throw ConfigError("invalid template id '" + item + "'");
    template_by_id(id);
    ids.push_back(id);
  }
  if (ids.empty()) throw ConfigError("--templates needs at least one id");
  return ids;
}

double population_stddev(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  DataColumns cols;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig config = load_config_file(a.config);
  if (a.seed) config.seed = *a.seed;
  const auto corpus = a.cols.read(a.data);
  const Checkpoint ckpt = train(config, corpus, [&](const EpochReport& r) {
    out << "epoch " << r.epoch << " loss " << r.mean_loss << " contrastive " << r.mean_contrastive
        << " cross_entropy " << r.mean_cross_entropy << "\n";
  });
  save_checkpoint(ckpt, a.out);
  out << "wrote " << a.out << " (" << ckpt.metrics.instances << " instances, " << ckpt.metrics.steps
      << " steps)\n";
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string support;
  std::string test;
  std::size_t k = 5;
  std::string report;
  DataColumns cols;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.k < 1) throw ConfigError("--k must be at least 1");
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const auto support = a.cols.read(a.support);
  const auto test = a.cols.read(a.test);
  const LabelStore store = build_label_store(ckpt, support);
  const Metrics m = evaluate_corpus(ckpt, store, test, a.k);
  OrderedJson report = metrics_to_json(m);
  report["k"] = a.k;
  write_file_atomic(a.report, dump_json(report) + "\n");
  out << "precision " << m.precision << " recall " << m.recall << " f1 " << m.f1 << " (k=" << a.k
      << ")\n";
}

// --- sample ----------------------------------------------------------------

struct SampleArgs {
  std::string data;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t splits = 5;
  std::string out_dir;
  DataColumns cols;
};

void cmd_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
  if (a.k < 1) throw ConfigError("--k must be at least 1");
  if (a.splits < 1) throw ConfigError("--splits must be at least 1");
  const auto corpus = a.cols.read(a.data);
  const FewShotSpec spec{a.k, a.seed, a.splits};

  for (const auto& [type, total] : mention_counts(corpus)) {
    if (total < a.k) {
      err << "warning: only " << total << " " << type << " mentions available for k=" << a.k
          << "; episodes take all of them\n";
    }
  }

  std::filesystem::create_directories(a.out_dir);
  for (std::size_t split = 0; split < a.splits; ++split) {
    std::vector<LabeledSentence> episode;
    for (const auto& s : sample_k_shot(corpus, spec, split)) {
      episode.push_back({s.tokens, type_labels(s)});
    }
    const auto path = (std::filesystem::path(a.out_dir) / ("split_" + std::to_string(split) + ".conll")).string();
    write_file_atomic(path, to_conll(episode));
    out << "wrote " << path << " (" << episode.size() << " sentences)\n";
  }
}

// --- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string data;
  std::string test;
  std::string templates = "1,2,3,4";
  std::string out;
  std::size_t k = 5;
  bool no_ablation = false;
  DataColumns cols;
};

OrderedJson sweep_block(const TrainConfig& base, const std::vector<int>& ids,
                        const std::vector<LabeledSentence>& train_corpus,
                        const std::vector<LabeledSentence>& test_corpus, std::size_t k,
                        std::ostream& out, const char* tag) {
  OrderedJson results = OrderedJson::array();
  std::vector<double> f1s;
  for (int id : ids) {
    TrainConfig config = base;
    config.template_id = id;
    const Checkpoint ckpt = train(config, train_corpus);
    const LabelStore store = build_label_store(ckpt, train_corpus);
    const Metrics m = evaluate_corpus(ckpt, store, test_corpus, k);
    OrderedJson entry = OrderedJson::object();
    entry["template_id"] = id;
    entry["f1"] = m.f1;
    entry["precision"] = m.precision;
    entry["recall"] = m.recall;
    results.push_back(std::move(entry));
    f1s.push_back(m.f1);
    out << tag << "template " << id << " f1 " << m.f1 << "\n";
  }
  OrderedJson block = OrderedJson::object();
  block["results"] = std::move(results);
  block["f1_std"] = population_stddev(f1s);
  return block;
}

void cmd_sweep(const SweepArgs& a, std::ostream& out) {
  if (a.k < 1) throw ConfigError("--k must be at least 1");
  const auto ids = parse_template_list(a.templates);
  const TrainConfig base = load_config_file(a.config);
  const auto train_corpus = a.cols.read(a.data);
  const auto test_corpus = a.test.empty() ? train_corpus : a.cols.read(a.test);

  OrderedJson report = sweep_block(base, ids, train_corpus, test_corpus, a.k, out, "");
  report["k"] = a.k;
  if (!a.no_ablation) {
    TrainConfig frozen = base;
    frozen.freeze_soft = true;
    report["frozen_soft_ablation"] = sweep_block(frozen, ids, train_corpus, test_corpus, a.k, out, "frozen-soft ");
  }
  write_file_atomic(a.out, dump_json(report) + "\n");
  out << "f1 std across templates " << report["f1_std"].get<double>() << "\n";
}

// --- tag -------------------------------------------------------------------

struct TagArgs {
  std::string ckpt;
  std::string support;
  std::string text;
  std::size_t k = 5;
  DataColumns cols;
};

void cmd_tag(const TagArgs& a, std::ostream& out) {
  if (a.k < 1) throw ConfigError("--k must be at least 1");
  const auto tokens = split_words(a.text);
  if (tokens.empty()) throw ConfigError("--text is empty");
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const auto support = a.cols.read(a.support);
  const LabelStore store = build_label_store(ckpt, support);
  const TaggedSentence tagged = tag_sentence(ckpt, store, tokens, a.k);
  for (std::size_t i = 0; i < tokens.size(); ++i) out << tokens[i] << '\t' << tagged.labels[i] << '\n';
  out << "spans:\n";
  for (const auto& span : tagged.spans) {
    out << span.start << '\t' << span.end << '\t' << span.entity_type << '\t';
    for (std::size_t i = span.start; i < span.end; ++i) out << (i > span.start ? " " : "") << tokens[i];
    out << '\n';
  }
}

// --- gen-toy ---------------------------------------------------------------

struct ToyArgs {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t train_count = 200;
  std::size_t test_count = 50;
};

void cmd_gen_toy(const ToyArgs& a, std::ostream& out) {
  const ToySplit split = toy_split(a.seed, a.train_count, a.test_count);
  std::filesystem::create_directories(a.out_dir);
  const auto dir = std::filesystem::path(a.out_dir);
  write_file_atomic((dir / "train.conll").string(), to_conll(split.train));
  write_file_atomic((dir / "test.conll").string(), to_conll(split.test));
  out << "wrote " << (dir / "train.conll").string() << " and " << (dir / "test.conll").string() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot NER with soft-hard prompts, contrastive training and kNN decoding"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--config", train_args.config, "Config JSON")->required();
  train_cmd->add_option("--data", train_args.data, "Training corpus (CoNLL columns)")->required();
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--seed", train_args.seed, "Override the config seed");
  add_column_flags(train_cmd, train_args.cols);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score a test corpus with kNN over a support corpus");
  eval_cmd->add_option("--ckpt", eval_args.ckpt)->required();
  eval_cmd->add_option("--support", eval_args.support)->required();
  eval_cmd->add_option("--test", eval_args.test)->required();
  eval_cmd->add_option("--k", eval_args.k, "Neighbours consulted")->capture_default_str();
  eval_cmd->add_option("--report", eval_args.report, "Metrics JSON path")->required();
  add_column_flags(eval_cmd, eval_args.cols);

  SampleArgs sample_args;
  auto* sample_cmd = app.add_subcommand("sample", "Write K-shot episodes, one file per split");
  sample_cmd->add_option("--data", sample_args.data)->required();
  sample_cmd->add_option("--k", sample_args.k, "Mentions per entity type")->required();
  sample_cmd->add_option("--seed", sample_args.seed)->capture_default_str();
  sample_cmd->add_option("--splits", sample_args.splits)->capture_default_str();
  sample_cmd->add_option("--out-dir", sample_args.out_dir)->required();
  add_column_flags(sample_cmd, sample_args.cols);

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate once per discrete template");
  sweep_cmd->add_option("--config", sweep_args.config)->required();
  sweep_cmd->add_option("--data", sweep_args.data, "Training and support corpus")->required();
  sweep_cmd->add_option("--test", sweep_args.test, "Evaluation corpus (default: --data)");
  sweep_cmd->add_option("--templates", sweep_args.templates)->capture_default_str();
  sweep_cmd->add_option("--out", sweep_args.out)->required();
  sweep_cmd->add_option("--k", sweep_args.k)->capture_default_str();
  sweep_cmd->add_flag("--no-ablation", sweep_args.no_ablation, "Skip the frozen-soft-prompt runs");
  add_column_flags(sweep_cmd, sweep_args.cols);

  TagArgs tag_args;
  auto* tag_cmd = app.add_subcommand("tag", "Tag one sentence");
  tag_cmd->add_option("--ckpt", tag_args.ckpt)->required();
  tag_cmd->add_option("--support", tag_args.support)->required();
  tag_cmd->add_option("--text", tag_args.text)->required();
  tag_cmd->add_option("--k", tag_args.k)->capture_default_str();
  add_column_flags(tag_cmd, tag_args.cols);

  ToyArgs toy_args;
  auto* toy_cmd = app.add_subcommand("gen-toy", "Write the synthetic gazetteer train/test corpus");
  toy_cmd->add_option("--out-dir", toy_args.out_dir)->required();
  toy_cmd->add_option("--seed", toy_args.seed)->capture_default_str();
  toy_cmd->add_option("--train", toy_args.train_count)->capture_default_str();
  toy_cmd->add_option("--test", toy_args.test_count)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    if (train_cmd->parsed()) cmd_train(train_args, out);
    if (eval_cmd->parsed()) cmd_eval(eval_args, out);
    if (sample_cmd->parsed()) cmd_sample(sample_args, out, err);
    if (sweep_cmd->parsed()) cmd_sweep(sweep_args, out);
    if (tag_cmd->parsed()) cmd_tag(tag_args, out);
    if (toy_cmd->parsed()) cmd_gen_toy(toy_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace contrastner
