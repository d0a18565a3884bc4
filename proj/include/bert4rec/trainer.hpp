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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "bert4rec/checkpoint.hpp"
#include "bert4rec/data.hpp"
#include "bert4rec/model.hpp"
#include "bert4rec/optimizer.hpp"

namespace bert4rec {

struct TrainerConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  std::uint64_t seed = 42;
  AdamHyper adam;
  double clip_norm = 5.0;
  std::size_t masks_per_sequence = 0;  // > 0 overrides the model's mask proportion
  std::size_t last_item_instances = 1;
  bool validate = true;
  std::size_t num_negatives = 100;

  void validate_settings() const;  // throws ConfigError
  KeyValues to_key_values() const; // keys without the "trainer." prefix
  static TrainerConfig from_key_values(const KeyValues& kv);
  bool operator==(const TrainerConfig&) const = default;
};

// Truncated normal N(0, 0.02^2) on [-0.02, 0.02] for every weight and
// embedding; zero biases; layer norms at (1, 0).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

double truncated_normal(Rng& rng, double stddev, double bound);

// Mean negative log-likelihood of the masked targets over the whole batch.
Tensor cloze_loss(const MaskedBatch& batch, const Bert4Rec& model, bool training, Rng* rng);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean over the epoch's batches
  std::optional<double> val_hr10;
  std::optional<double> val_ndcg10;
  double lr = 0.0;  // at the end of the epoch
  double wallclock_s = 0.0;  // since the start of this run
  std::size_t samples = 0;   // training instances seen this epoch
  double train_s = 0.0;      // time in the batch loop, excluding validation
};

// Tab-separated `epoch loss val_HR@10 val_NDCG@10 lr wallclock_s`.
std::string epoch_log_header();
std::string format_epoch_log(const EpochLog& log);

struct TrainOptions {
  const Checkpoint* resume = nullptr;
  // Stop once this many epochs are complete; 0 runs to TrainerConfig::epochs.
  std::size_t stop_after_epochs = 0;
  std::uint64_t dataset_fingerprint = 0;
  std::function<void(const EpochLog&)> on_epoch;
  // Called with the state at every epoch boundary.
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct TrainResult {
  Checkpoint final_checkpoint;
  std::optional<Checkpoint> best_checkpoint;  // highest validation NDCG@10
  std::vector<EpochLog> log;
};

TrainResult train(const ModelConfig& model_config, const TrainerConfig& trainer_config,
                  const InteractionDataset& dataset, const TrainOptions& options = {});

}  // namespace bert4rec
