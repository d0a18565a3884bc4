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

#include "bert4rec/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "bert4rec/errors.hpp"
#include "bert4rec/evaluator.hpp"

namespace bert4rec {
namespace {

constexpr double kInitStddev = 0.02;

const std::string& need(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("missing trainer setting '" + key + "'");
  return it->second;
}

std::size_t need_size(const KeyValues& kv, const std::string& key) {
  const std::string& text = need(kv, key);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || text[0] == '-') {
    throw ConfigError("trainer setting '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return static_cast<std::size_t>(v);
}

double need_real(const KeyValues& kv, const std::string& key) {
  const std::string& text = need(kv, key);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw ConfigError("trainer setting '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

bool need_flag(const KeyValues& kv, const std::string& key) {
  const std::string& text = need(kv, key);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("trainer setting '" + key + "' expects true/false, got '" + text + "'");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void TrainerConfig::validate_settings() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
  if (!(adam.weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative (0 disables clipping)");
  if (validate && num_negatives == 0) throw ConfigError("num_negatives must be positive");
}

KeyValues TrainerConfig::to_key_values() const {
  return {
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"seed", std::to_string(seed)},
      {"learning_rate", format_double(adam.learning_rate)},
      {"beta1", format_double(adam.beta1)},
      {"beta2", format_double(adam.beta2)},
      {"adam_epsilon", format_double(adam.epsilon)},
      {"weight_decay", format_double(adam.weight_decay)},
      {"clip_norm", format_double(clip_norm)},
      {"masks_per_sequence", std::to_string(masks_per_sequence)},
      {"last_item_instances", std::to_string(last_item_instances)},
      {"validate", validate ? "true" : "false"},
      {"num_negatives", std::to_string(num_negatives)},
  };
}

TrainerConfig TrainerConfig::from_key_values(const KeyValues& kv) {
  TrainerConfig c;
  c.epochs = need_size(kv, "epochs");
  c.batch_size = need_size(kv, "batch_size");
  c.seed = need_size(kv, "seed");
  c.adam.learning_rate = need_real(kv, "learning_rate");
  c.adam.beta1 = need_real(kv, "beta1");
  c.adam.beta2 = need_real(kv, "beta2");
  c.adam.epsilon = need_real(kv, "adam_epsilon");
  c.adam.weight_decay = need_real(kv, "weight_decay");
  c.clip_norm = need_real(kv, "clip_norm");
  c.masks_per_sequence = need_size(kv, "masks_per_sequence");
  c.last_item_instances = need_size(kv, "last_item_instances");
  c.validate = need_flag(kv, "validate");
  c.num_negatives = need_size(kv, "num_negatives");
  return c;
}

double truncated_normal(Rng& rng, double stddev, double bound) {
  for (;;) {
    const double x = stddev * rng.normal();
    if (x >= -bound && x <= bound) return x;
  }
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params = ModelParams::zeros(config);
  Rng rng(derive_seed(seed, "init"));
  for (NamedParam& p : params.named()) {
    if (!p.decay) continue;  // biases and layer norms keep their zeros() values
    for (double& w : p.tensor.mutable_values()) w = truncated_normal(rng, kInitStddev, kInitStddev);
  }
  return params;
}

Tensor cloze_loss(const MaskedBatch& batch, const Bert4Rec& model, bool training, Rng* rng) {
  const std::size_t n = batch.input.length;
  std::vector<std::size_t> rows;
  std::vector<std::size_t> labels;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    for (std::size_t j = 0; j < batch.label_positions[r].size(); ++j) {
      rows.push_back(r * n + batch.label_positions[r][j]);
      labels.push_back(batch.labels[r][j] - 1);
    }
  }
  if (rows.empty()) throw ContractError("cloze_loss needs at least one masked position");
  const Tensor hidden = model.forward(batch.input, training, rng);
  const Tensor gathered = embedding_lookup(hidden, rows);
  return softmax_cross_entropy(model.output_logits(gathered), labels);
}

std::string epoch_log_header() { return "epoch\tloss\tval_HR@10\tval_NDCG@10\tlr\twallclock_s"; }

std::string format_epoch_log(const EpochLog& log) {
  std::ostringstream out;
  out << log.epoch << '\t' << fixed(log.loss, 6) << '\t' << (log.val_hr10 ? fixed(*log.val_hr10, 6) : "NA") << '\t'
      << (log.val_ndcg10 ? fixed(*log.val_ndcg10, 6) : "NA") << '\t' << format_double(log.lr) << '\t'
      << fixed(log.wallclock_s, 3);
  return out.str();
}

TrainResult train(const ModelConfig& model_config, const TrainerConfig& trainer_config,
                  const InteractionDataset& dataset, const TrainOptions& options) {
  model_config.validate();
  trainer_config.validate_settings();
  if (model_config.num_items != dataset.num_items()) {
    throw MismatchError("model has " + std::to_string(model_config.num_items) + " items but the dataset has " +
                        std::to_string(dataset.num_items()));
  }
  retain_freed_memory();
  const auto started = std::chrono::steady_clock::now();
  const LeaveOneOutSplit split = leave_one_out(dataset);

  ModelParams params;
  OptimizerState optimizer;
  Rng dropout_rng(derive_seed(trainer_config.seed, "dropout"));
  std::size_t first_epoch = 0;
  double best = -1.0;
  if (options.resume != nullptr) {
    const Checkpoint& ck = *options.resume;
    if (!(ck.model == model_config)) throw MismatchError("resume checkpoint was written for a different model");
    if (ck.dataset_fingerprint != options.dataset_fingerprint) {
      throw MismatchError("resume checkpoint was written for a different dataset");
    }
    const KeyValues settings = trainer_config.to_key_values();
    if (!ck.trainer_settings.empty() && ck.trainer_settings != settings) {
      std::string keys;
      for (const auto& [key, value] : settings) {
        const auto it = ck.trainer_settings.find(key);
        if (it == ck.trainer_settings.end() || it->second != value) keys += (keys.empty() ? "" : ", ") + key;
      }
      throw MismatchError("resume checkpoint was written with different trainer settings: " + keys);
    }
    params = ck.params.clone();
    optimizer = ck.optimizer;
    dropout_rng.restore(ck.rng_state);
    first_epoch = ck.epoch;
    best = ck.best_validation;
  } else {
    params = init_params(model_config, trainer_config.seed);
  }
  const Bert4Rec model(model_config, std::move(params));
  const std::vector<NamedParam> named = model.params().named();
  for (const NamedParam& p : named) {
    Tensor t = p.tensor;
    t.set_requires_grad(true);
  }
  if (optimizer.first_moment.empty()) {
    const std::size_t step = optimizer.step;
    optimizer = OptimizerState::zeros(named);
    optimizer.step = step;
  }

  BatchOptions batch_options;
  batch_options.max_len = model_config.max_len;
  batch_options.mask_proportion = model_config.mask_proportion;
  batch_options.masks_per_sequence = trainer_config.masks_per_sequence;
  batch_options.last_item_instances = trainer_config.last_item_instances;
  batch_options.batch_size = trainer_config.batch_size;
  const std::size_t instances = split.users.size() * (1 + trainer_config.last_item_instances);
  const std::size_t batches_per_epoch = (instances + trainer_config.batch_size - 1) / trainer_config.batch_size;
  const std::size_t total_steps = trainer_config.epochs * batches_per_epoch;

  auto snapshot = [&](std::size_t epochs_done) {
    Checkpoint ck;
    ck.model = model_config;
    ck.params = model.params().clone();
    ck.optimizer = optimizer;
    ck.trainer_settings = trainer_config.to_key_values();
    ck.rng_state = dropout_rng.state();
    ck.epoch = epochs_done;
    ck.dataset_fingerprint = options.dataset_fingerprint;
    ck.best_validation = best;
    return ck;
  };

  TrainResult result;
  const std::size_t last_epoch = options.stop_after_epochs > 0
                                     ? std::min(options.stop_after_epochs, trainer_config.epochs)
                                     : trainer_config.epochs;
  Tape tape;
  for (std::size_t epoch = first_epoch; epoch < last_epoch; ++epoch) {
    const std::vector<MaskedBatch> batches = make_training_batches(
        split, dataset.num_items(), batch_options, derive_seed(trainer_config.seed, "epoch", epoch));
    const auto epoch_started = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    double lr = 0.0;
    std::size_t samples = 0;
    for (const MaskedBatch& batch : batches) {
      for (const NamedParam& p : named) {
        Tensor t = p.tensor;
        t.zero_grad();
      }
      double loss_value = 0.0;
      {
        Tape::Scope scope(tape);
        const Tensor loss = cloze_loss(batch, model, true, &dropout_rng);
        loss_value = loss.item();
        backward(loss, tape);
      }
      lr = lr_at(optimizer.step, total_steps, trainer_config.adam.learning_rate);
      const double norm = clip_global_norm(named, trainer_config.clip_norm);
      if (!std::isfinite(loss_value) || !std::isfinite(norm)) {
        throw NumericError("non-finite training loss " + format_double(loss_value) + " at step " +
                           std::to_string(optimizer.step) + " (lr " + format_double(lr) + ", grad norm " +
                           format_double(norm) + ")");
      }
      AdamHyper hyper = trainer_config.adam;
      hyper.learning_rate = lr;
      adam_step(named, optimizer, hyper);
      loss_sum += loss_value;
      samples += batch.rows();
    }

    EpochLog log;
    log.epoch = epoch + 1;
    log.loss = batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
    log.lr = lr;
    log.samples = samples;
    log.train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_started).count();
    bool improved = false;
    if (trainer_config.validate) {
      const EvalReport report = evaluate(ModelScorer(model), dataset, split, EvalSplit::kValidation,
                                         trainer_config.seed, trainer_config.num_negatives);
      log.val_hr10 = report.metrics.at("HR@10");
      log.val_ndcg10 = report.metrics.at("NDCG@10");
      if (*log.val_ndcg10 > best) {
        best = *log.val_ndcg10;
        improved = true;
      }
    }
    log.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(log);
    if (options.on_epoch) options.on_epoch(log);

    Checkpoint ck = snapshot(epoch + 1);
    if (improved) result.best_checkpoint = ck;
    if (options.on_checkpoint) options.on_checkpoint(ck);
  }
  result.final_checkpoint = snapshot(std::max(first_epoch, last_epoch));
  return result;
}

}  // namespace bert4rec
