// Copyright 2026 The bert4rec-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "bert4rec/checkpoint.hpp"
#include "bert4rec/data.hpp"
#include "bert4rec/errors.hpp"
#include "bert4rec/evaluator.hpp"
#include "bert4rec/trainer.hpp"

namespace fs = std::filesystem;

namespace bert4rec::cli {
namespace {

constexpr const char* kDatasetFile = "dataset.txt";
constexpr const char* kVocabFile = "vocab.tsv";

struct Preset {
  double mask_proportion;
  std::size_t max_len;
};

const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> table = {
      {"beauty", {0.6, 50}},
      {"steam", {0.4, 50}},
      {"movielens", {0.2, 200}},
  };
  return table;
}

// Options shared by `train` and `sweep`.
struct RunOptions {
  std::string dataset;
  std::string out_dir;
  std::string preset;
  std::string attention_mode = "bidirectional";
  std::vector<std::string> ablate;
  std::string resume;
  bool no_validate = false;
  ModelConfig model;
  TrainerConfig trainer;
  CLI::Option* mask_option = nullptr;
  CLI::Option* max_len_option = nullptr;
};

void add_run_options(CLI::App* app, RunOptions& o) {
  app->add_option("--dataset", o.dataset, "prepared dataset file (from `prepare`)")->required();
  app->add_option("--out-dir", o.out_dir, "directory for checkpoints and logs")->required();
  app->add_option("--preset", o.preset, "per-dataset defaults for mask proportion and max length")
      ->check(CLI::IsMember({"beauty", "steam", "movielens"}));
  app->add_option("--layers", o.model.num_layers, "number of Transformer layers L")->capture_default_str();
  app->add_option("--heads", o.model.num_heads, "attention heads h")->capture_default_str();
  app->add_option("--hidden-dim", o.model.hidden_dim, "hidden size d")->capture_default_str();
  o.max_len_option = app->add_option("--max-len", o.model.max_len, "maximum sequence length N")->capture_default_str();
  app->add_option("--dropout", o.model.dropout_p, "dropout probability")->capture_default_str();
  o.mask_option =
      app->add_option("--mask-proportion", o.model.mask_proportion, "Cloze mask proportion rho")->capture_default_str();
  app->add_option("--attention-mode", o.attention_mode, "bidirectional or causal")
      ->check(CLI::IsMember({"bidirectional", "causal"}))
      ->capture_default_str();
  app->add_option("--ablate", o.ablate, "comma-separated: no-pe,no-pffn,no-ln,no-rc,no-dropout")
      ->delimiter(',')
      ->check(CLI::IsMember({"no-pe", "no-pffn", "no-ln", "no-rc", "no-dropout"}));
  app->add_option("--layer-norm-eps", o.model.layer_norm_eps, "layer-norm epsilon")->capture_default_str();
  app->add_option("--epochs", o.trainer.epochs, "training epochs")->capture_default_str();
  app->add_option("--batch-size", o.trainer.batch_size, "instances per batch")->capture_default_str();
  app->add_option("--seed", o.trainer.seed, "base seed for every random stream")->capture_default_str();
  app->add_option("--lr", o.trainer.adam.learning_rate, "initial learning rate")->capture_default_str();
  app->add_option("--beta1", o.trainer.adam.beta1, "Adam beta1")->capture_default_str();
  app->add_option("--beta2", o.trainer.adam.beta2, "Adam beta2")->capture_default_str();
  app->add_option("--adam-eps", o.trainer.adam.epsilon, "Adam epsilon")->capture_default_str();
  app->add_option("--weight-decay", o.trainer.adam.weight_decay, "decoupled weight decay")->capture_default_str();
  app->add_option("--clip-norm", o.trainer.clip_norm, "global gradient-norm threshold (0 = off)")
      ->capture_default_str();
  app->add_option("--masks-per-sequence", o.trainer.masks_per_sequence,
                  "fixed number of masks per training sequence (0 = use the proportion)")
      ->capture_default_str();
  app->add_option("--last-item-instances", o.trainer.last_item_instances,
                  "extra last-item-masked instances per user and epoch")
      ->capture_default_str();
  app->add_option("--num-negatives", o.trainer.num_negatives, "negatives per validation user")
      ->capture_default_str();
  app->add_flag("--no-validate", o.no_validate, "skip the per-epoch validation pass");
}

// Applies the preset (only where no explicit value was given), the mode and
// the ablation toggles, and the dataset's item count.
void finalize_run(RunOptions& o, std::size_t num_items) {
  if (!o.preset.empty()) {
    const Preset& p = presets().at(o.preset);
    if (o.mask_option->count() == 0) o.model.mask_proportion = p.mask_proportion;
    if (o.max_len_option->count() == 0) o.model.max_len = p.max_len;
  }
  o.model.attention_mode = parse_attention_mode(o.attention_mode);
  for (const std::string& toggle : o.ablate) {
    if (toggle == "no-pe") o.model.use_positional_embedding = false;
    if (toggle == "no-pffn") o.model.use_pffn = false;
    if (toggle == "no-ln") o.model.use_layer_norm = false;
    if (toggle == "no-rc") o.model.use_residual = false;
    if (toggle == "no-dropout") o.model.use_dropout = false;
  }
  o.trainer.validate = !o.no_validate;
  o.model.num_items = num_items;
  o.model.validate();
  o.trainer.validate_settings();
}

void echo_config(std::ostream& err, const std::string& command, const ModelConfig& model,
                 const TrainerConfig* trainer) {
  err << "# " << command << " config\n";
  for (const auto& [k, v] : model.to_key_values()) err << "#   " << k << " = " << v << '\n';
  if (trainer != nullptr) {
    for (const auto& [k, v] : trainer->to_key_values()) err << "#   trainer." << k << " = " << v << '\n';
  }
}

fs::path vocab_beside(const fs::path& dataset) { return dataset.parent_path() / kVocabFile; }

InteractionDataset load_prepared(const std::string& dataset) {
  const fs::path vocab = vocab_beside(dataset);
  if (fs::exists(vocab)) return load_dataset(dataset, vocab);
  return load_dataset(dataset);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string metrics_line(const EvalReport& report) {
  std::ostringstream out;
  bool first = true;
  for (const char* name : {"HR@1", "HR@5", "HR@10", "NDCG@5", "NDCG@10", "MRR"}) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%.4f", name, report.metrics.at(name));
    out << (first ? "" : " ") << buf;
    first = false;
  }
  return out.str();
}

// ---------------------------------------------------------------- prepare

struct PrepareOptions {
  std::string input;
  std::string format = "movielens";
  std::string out_dir;
  std::string name;
  std::size_t min_user = 5;
  std::size_t min_item = 5;
  bool csv_header = false;
  std::string user_column = "0";
  std::string item_column = "1";
  std::string time_column = "2";
  char delimiter = ',';
  CLI::Option* min_item_option = nullptr;
};

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

int cmd_prepare(PrepareOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<InteractionRecord> records;
  BuildOptions build;
  build.min_user_interactions = o.min_user;
  if (o.format == "movielens") {
    records = parse_movielens(o.input);
    build.min_item_interactions = o.min_item;
  } else {
    CsvColumnSpec spec;
    if (o.csv_header && !(all_digits(o.user_column) && all_digits(o.item_column) && all_digits(o.time_column))) {
      spec = CsvColumnSpec::named(o.user_column, o.item_column, o.time_column);
    } else {
      if (!(all_digits(o.user_column) && all_digits(o.item_column) && all_digits(o.time_column))) {
        throw ConfigError("column names need --csv-header; otherwise give zero-based column indices");
      }
      spec = CsvColumnSpec::positional(std::stoul(o.user_column), std::stoul(o.item_column),
                                       std::stoul(o.time_column));
      spec.header = o.csv_header;
    }
    spec.delimiter = o.delimiter;
    records = parse_csv(o.input, spec);
    build.min_item_interactions = o.min_item_option->count() > 0 ? o.min_item : 0;
  }
  err << "# prepare: " << records.size() << " records from " << o.input << " (min_user=" << build.min_user_interactions
      << ", min_item=" << build.min_item_interactions << ")\n";
  const InteractionDataset dataset = build_dataset(records, build);
  fs::create_directories(o.out_dir);
  save_dataset(dataset, fs::path(o.out_dir) / kDatasetFile, fs::path(o.out_dir) / kVocabFile);
  const std::string name = o.name.empty() ? fs::path(o.input).stem().string() : o.name;
  out << format_stats_table(name, dataset.stats());
  return kExitOk;
}

// ------------------------------------------------------------------ train

int cmd_train(RunOptions& o, std::ostream& out, std::ostream& err) {
  const InteractionDataset dataset = load_prepared(o.dataset);
  finalize_run(o, dataset.num_items());
  echo_config(err, "train", o.model, &o.trainer);
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);

  TrainOptions train_options;
  train_options.dataset_fingerprint = file_fingerprint(o.dataset);
  std::optional<Checkpoint> resume;
  if (!o.resume.empty()) {
    resume = load_checkpoint(o.resume, o.model);
    train_options.resume = &*resume;
  }
  const fs::path log_path = dir / "train_log.tsv";
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write '" + log_path.string() + "'");
  if (!resume) log << epoch_log_header() << '\n';
  out << epoch_log_header() << '\n';
  train_options.on_epoch = [&](const EpochLog& entry) {
    const std::string line = format_epoch_log(entry);
    log << line << '\n' << std::flush;
    out << line << '\n' << std::flush;
  };
  double best = resume ? resume->best_validation : -1.0;
  train_options.on_checkpoint = [&](const Checkpoint& ck) {
    save_checkpoint(ck, dir / "last.ckpt");
    if (ck.best_validation > best) {
      best = ck.best_validation;
      save_checkpoint(ck, dir / "best.ckpt");
    }
  };
  const TrainResult result = train(o.model, o.trainer, dataset, train_options);
  save_checkpoint(result.final_checkpoint, dir / "final.ckpt");
  err << "# wrote " << (dir / "final.ckpt").string() << '\n';
  return kExitOk;
}

// --------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  std::uint64_t seed = 42;
  std::size_t num_negatives = 100;
  std::string baseline;
  std::string output;
  std::string ranks;
};

int cmd_evaluate(EvaluateOptions& o, std::ostream& out, std::ostream& err) {
  const InteractionDataset dataset = load_prepared(o.dataset);
  const LeaveOneOutSplit split = leave_one_out(dataset);
  const EvalSplit which = parse_eval_split(o.split);
  EvalReport report;
  if (o.baseline == "pop") {
    err << "# evaluate: POP baseline, split=" << to_string(which) << " seed=" << o.seed << '\n';
    report = evaluate(PopScorer(dataset), dataset, split, which, o.seed, o.num_negatives);
  } else {
    if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required unless --baseline pop is given");
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const std::uint64_t fingerprint = file_fingerprint(o.dataset);
    if (ck.dataset_fingerprint != fingerprint) {
      throw MismatchError("checkpoint was trained on a different dataset file (fingerprint " +
                          std::to_string(ck.dataset_fingerprint) + ", '" + o.dataset + "' has " +
                          std::to_string(fingerprint) + ")");
    }
    echo_config(err, "evaluate", ck.model, nullptr);
    err << "# evaluate: split=" << to_string(which) << " seed=" << o.seed << " negatives=" << o.num_negatives << '\n';
    const Bert4Rec model(ck.model, ck.params);
    report = evaluate(ModelScorer(model), dataset, split, which, o.seed, o.num_negatives);
  }
  const std::string json = report.to_json();
  if (!o.output.empty()) write_file(o.output, json);
  if (!o.ranks.empty()) write_file(o.ranks, report.ranks_tsv(&dataset));
  out << json;
  err << "# " << metrics_line(report) << '\n';
  return kExitOk;
}

// -------------------------------------------------------------- recommend

struct RecommendOptions {
  std::string checkpoint;
  std::string dataset;
  std::vector<std::string> history;
  std::size_t k = 10;
};

int cmd_recommend(RecommendOptions& o, std::ostream& out, std::ostream& err) {
  const InteractionDataset dataset = load_prepared(o.dataset);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  if (ck.model.num_items != dataset.num_items()) {
    throw MismatchError("checkpoint has " + std::to_string(ck.model.num_items) + " items, dataset has " +
                        std::to_string(dataset.num_items()));
  }
  std::vector<ItemId> history;
  for (const std::string& external : o.history) {
    const std::optional<ItemId> id = dataset.find_item(external);
    if (!id) throw ConfigError("unknown item id '" + external + "'");
    history.push_back(*id);
  }
  const Bert4Rec model(ck.model, ck.params);
  err << "# recommend: " << history.size() << " history items, k=" << o.k << '\n';
  out << "item\tprobability\n";
  for (const ScoredItem& s : model.predict_next(history, o.k)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", s.probability);
    out << dataset.item_names[s.item - 1] << '\t' << buf << '\n';
  }
  return kExitOk;
}

// ------------------------------------------------------- export-attention

struct ExportOptions {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  std::string out_dir;
  std::size_t window = 10;
};

int cmd_export_attention(ExportOptions& o, std::ostream& out, std::ostream& err) {
  const InteractionDataset dataset = load_prepared(o.dataset);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  if (ck.model.num_items != dataset.num_items()) throw MismatchError("checkpoint and dataset disagree on |V|");
  const LeaveOneOutSplit split = leave_one_out(dataset);
  const EvalSplit which = parse_eval_split(o.split);
  std::vector<std::vector<ItemId>> histories;
  histories.reserve(split.users.size());
  for (const UserSplit& u : split.users) histories.push_back(evaluation_history(u, which));
  const Bert4Rec model(ck.model, ck.params);
  std::size_t used = 0;
  const auto maps = average_window_attention(model, histories, o.window, &used);
  if (used == 0) throw DataError("no user has " + std::to_string(o.window - 1) + " history items to fill the window");
  fs::create_directories(o.out_dir);
  for (std::size_t l = 0; l < maps.size(); ++l) {
    for (std::size_t h = 0; h < maps[l].size(); ++h) {
      std::ostringstream csv;
      const std::size_t w = o.window;
      for (std::size_t i = 0; i < w; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.8f", maps[l][h][i * w + j]);
          csv << (j ? "," : "") << buf;
        }
        csv << '\n';
      }
      const fs::path path = fs::path(o.out_dir) / ("attention_l" + std::to_string(l + 1) + "_h" +
                                                   std::to_string(h + 1) + ".csv");
      write_file(path, csv.str());
      out << path.string() << '\n';
    }
  }
  err << "# export-attention: averaged over " << used << " users\n";
  return kExitOk;
}

// ------------------------------------------------------------------ sweep

struct SweepOptions {
  RunOptions run;
  std::string axis;
  std::vector<std::string> values;
  std::string output;
};

void apply_axis(RunOptions& o, const std::string& axis, const std::string& value) {
  std::size_t used = 0;
  if (axis == "mask-proportion") {
    o.model.mask_proportion = std::stod(value, &used);
  } else {
    const unsigned long v = std::stoul(value, &used);
    if (axis == "hidden-dim") o.model.hidden_dim = v;
    if (axis == "max-len") o.model.max_len = v;
    if (axis == "layers") o.model.num_layers = v;
    if (axis == "heads") o.model.num_heads = v;
  }
  if (used != value.size()) throw ConfigError("bad sweep value '" + value + "'");
}

int cmd_sweep(SweepOptions& s, std::ostream& out, std::ostream& err) {
  const InteractionDataset dataset = load_prepared(s.run.dataset);
  const LeaveOneOutSplit split = leave_one_out(dataset);
  const std::uint64_t fingerprint = file_fingerprint(s.run.dataset);
  std::ostringstream table;
  table << "value\tHR@1\tHR@5\tHR@10\tNDCG@5\tNDCG@10\tMRR";
  if (s.axis == "max-len") table << "\tsamples_per_s";
  table << '\n';
  out << table.str() << std::flush;
  std::size_t failures = 0;
  for (const std::string& value : s.values) {
    std::ostringstream row;
    row << value;
    try {
      RunOptions o = s.run;
      finalize_run(o, dataset.num_items());  // preset first, then the swept value wins
      apply_axis(o, s.axis, value);
      o.model.validate();
      echo_config(err, "sweep " + s.axis + "=" + value, o.model, &o.trainer);
      TrainOptions train_options;
      train_options.dataset_fingerprint = fingerprint;
      const TrainResult result = train(o.model, o.trainer, dataset, train_options);
      const Checkpoint& chosen = result.best_checkpoint ? *result.best_checkpoint : result.final_checkpoint;
      const Bert4Rec model(o.model, chosen.params);
      const EvalReport report =
          evaluate(ModelScorer(model), dataset, split, EvalSplit::kTest, o.trainer.seed, o.trainer.num_negatives);
      for (const char* name : {"HR@1", "HR@5", "HR@10", "NDCG@5", "NDCG@10", "MRR"}) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", report.metrics.at(name));
        row << '\t' << buf;
      }
      if (s.axis == "max-len") {
        double seconds = 0.0;
        std::size_t samples = 0;
        for (const EpochLog& e : result.log) {
          seconds += e.train_s;
          samples += e.samples;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", seconds > 0.0 ? static_cast<double>(samples) / seconds : 0.0);
        row << '\t' << buf;
      }
    } catch (const std::exception& e) {
      ++failures;
      row << "\tERROR\t" << e.what();
      err << "# sweep " << s.axis << "=" << value << " failed: " << e.what() << '\n';
    }
    table << row.str() << '\n';
    out << row.str() << '\n' << std::flush;
  }
  if (!s.output.empty()) write_file(s.output, table.str());
  return failures == s.values.size() && !s.values.empty() ? kExitData : kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return kExitNumeric;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return kExitData;
  if (dynamic_cast<const fs::filesystem_error*>(&e) != nullptr) return kExitData;
  return kExitUsage;
}

}  // namespace

std::vector<std::vector<std::vector<double>>> average_window_attention(
    const Bert4Rec& model, std::span<const std::vector<ItemId>> histories, std::size_t window, std::size_t* used) {
  const ModelConfig& config = model.config();
  if (window == 0 || window > config.max_len) throw ConfigError("attention window must lie in [1, max_len]");
  const std::size_t n = config.max_len;
  std::vector<std::vector<std::vector<double>>> sums(
      config.num_layers, std::vector<std::vector<double>>(config.num_heads, std::vector<double>(window * window, 0.0)));
  std::size_t count = 0;
  for (const std::vector<ItemId>& history : histories) {
    if (history.size() + 1 < window) continue;  // window would reach into padding
    const std::vector<TokenId> ids = model.prediction_input(history);
    const auto maps = model.attention_maps(ids);
    const std::size_t offset = n - window;
    for (std::size_t l = 0; l < maps.size(); ++l) {
      for (std::size_t h = 0; h < maps[l].size(); ++h) {
        const std::span<const double> a = maps[l][h].values();
        for (std::size_t i = 0; i < window; ++i) {
          double row = 0.0;
          for (std::size_t j = 0; j < window; ++j) row += a[(offset + i) * n + offset + j];
          if (row <= 0.0) continue;
          for (std::size_t j = 0; j < window; ++j) sums[l][h][i * window + j] += a[(offset + i) * n + offset + j] / row;
        }
      }
    }
    ++count;
  }
  if (count > 0) {
    for (auto& layer : sums) {
      for (auto& head : layer) {
        for (double& v : head) v /= static_cast<double>(count);
      }
    }
  }
  if (used != nullptr) *used = count;
  return sums;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"BERT4Rec sequential recommendation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "bert4rec 1.0.0");

  PrepareOptions prepare;
  CLI::App* prep = app.add_subcommand("prepare", "parse raw interactions, filter, and write a prepared dataset");
  prep->add_option("--input", prepare.input, "raw interaction file")->required();
  prep->add_option("--format", prepare.format, "movielens (:: separated) or csv")
      ->check(CLI::IsMember({"movielens", "csv"}))
      ->capture_default_str();
  prep->add_option("--out-dir", prepare.out_dir, "output directory")->required();
  prep->add_option("--name", prepare.name, "dataset name for the stats table");
  prep->add_option("--min-user", prepare.min_user, "minimum interactions per user")->capture_default_str();
  prepare.min_item_option =
      prep->add_option("--min-item", prepare.min_item, "minimum interactions per item (csv default: off)")
          ->capture_default_str();
  prep->add_flag("--csv-header", prepare.csv_header, "csv input has a header row");
  prep->add_option("--user-col", prepare.user_column, "csv user column (name or zero-based index)")
      ->capture_default_str();
  prep->add_option("--item-col", prepare.item_column, "csv item column")->capture_default_str();
  prep->add_option("--time-col", prepare.time_column, "csv timestamp column")->capture_default_str();
  prep->add_option("--delimiter", prepare.delimiter, "csv field delimiter")->capture_default_str();

  RunOptions train_run;
  CLI::App* tr = app.add_subcommand("train", "train a model on a prepared dataset");
  tr->set_config("--config", "", "key=value config file; command-line flags override it");
  tr->allow_config_extras(CLI::config_extras_mode::error);
  add_run_options(tr, train_run);
  tr->add_option("--resume", train_run.resume, "checkpoint to resume from");

  EvaluateOptions evaluate_opts;
  CLI::App* ev = app.add_subcommand("evaluate", "rank each user's held-out item against sampled negatives");
  ev->add_option("--checkpoint", evaluate_opts.checkpoint, "trained checkpoint");
  ev->add_option("--dataset", evaluate_opts.dataset, "prepared dataset file")->required();
  ev->add_option("--split", evaluate_opts.split, "test or validation")
      ->check(CLI::IsMember({"test", "validation", "val"}))
      ->capture_default_str();
  ev->add_option("--seed", evaluate_opts.seed, "negative-sampling seed")->capture_default_str();
  ev->add_option("--num-negatives", evaluate_opts.num_negatives, "negatives per user")->capture_default_str();
  ev->add_option("--baseline", evaluate_opts.baseline, "evaluate a baseline instead of a checkpoint")
      ->check(CLI::IsMember({"pop"}));
  ev->add_option("--output", evaluate_opts.output, "write the JSON report here");
  ev->add_option("--ranks", evaluate_opts.ranks, "write per-user ranks (TSV) here");

  RecommendOptions recommend;
  CLI::App* rec = app.add_subcommand("recommend", "top-k next items for a history");
  rec->add_option("--checkpoint", recommend.checkpoint, "trained checkpoint")->required();
  rec->add_option("--dataset", recommend.dataset, "prepared dataset file (its vocab maps item ids)")
      ->required()
      ;
  rec->add_option("--history", recommend.history, "comma-separated external item ids, oldest first")
      ->required()
      ->delimiter(',');
  rec->add_option("--k", recommend.k, "number of recommendations")->capture_default_str();

  ExportOptions export_opts;
  CLI::App* ex = app.add_subcommand("export-attention", "write averaged attention maps as CSV, one per layer and head");
  ex->add_option("--checkpoint", export_opts.checkpoint, "trained checkpoint")->required();
  ex->add_option("--dataset", export_opts.dataset, "prepared dataset file")->required();
  ex->add_option("--split", export_opts.split, "test or validation")
      ->check(CLI::IsMember({"test", "validation", "val"}))
      ->capture_default_str();
  ex->add_option("--out-dir", export_opts.out_dir, "output directory")->required();
  ex->add_option("--window", export_opts.window, "number of final positions N'")->capture_default_str();

  SweepOptions sweep;
  CLI::App* sw = app.add_subcommand("sweep", "train and test one model per value of a hyperparameter");
  sw->set_config("--config", "", "key=value config file for the base run");
  sw->allow_config_extras(CLI::config_extras_mode::error);
  add_run_options(sw, sweep.run);
  sw->add_option("--axis", sweep.axis, "hyperparameter to vary")
      ->required()
      ->check(CLI::IsMember({"mask-proportion", "hidden-dim", "max-len", "layers", "heads"}));
  sw->add_option("--values", sweep.values, "comma-separated values")->required()->delimiter(',');
  sw->add_option("--output", sweep.output, "also write the results table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*prep) return cmd_prepare(prepare, out, err);
    if (*tr) return cmd_train(train_run, out, err);
    if (*ev) return cmd_evaluate(evaluate_opts, out, err);
    if (*rec) return cmd_recommend(recommend, out, err);
    if (*ex) return cmd_export_attention(export_opts, out, err);
    if (*sw) return cmd_sweep(sweep, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("bert4rec");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace bert4rec::cli
