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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bert4rec/rng.hpp"
#include "bert4rec/tokens.hpp"

namespace bert4rec {

// One raw log line. The weight (rating) is kept for auditing only; every
// record becomes implicit feedback of 1.
struct InteractionRecord {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
  double weight = 1.0;
};

// `user::item::rating::timestamp` lines (MovieLens .dat).
std::vector<InteractionRecord> parse_movielens(const std::filesystem::path& path);
std::vector<InteractionRecord> parse_movielens(std::istream& in);

// Column selection for delimited logs. With `header`, columns are found by
// name in the first record; otherwise by zero-based position.
struct CsvColumnSpec {
  bool header = false;
  std::string user_column = "user";
  std::string item_column = "item";
  std::string timestamp_column = "timestamp";
  std::size_t user_index = 0;
  std::size_t item_index = 1;
  std::size_t timestamp_index = 2;
  char delimiter = ',';

  static CsvColumnSpec positional(std::size_t user, std::size_t item, std::size_t timestamp);
  static CsvColumnSpec named(std::string user, std::string item, std::string timestamp);
};

std::vector<InteractionRecord> parse_csv(const std::filesystem::path& path, const CsvColumnSpec& spec);
std::vector<InteractionRecord> parse_csv(std::istream& in, const CsvColumnSpec& spec);

struct DatasetStats {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_actions = 0;
  double avg_length = 0.0;
  double density = 0.0;  // actions / (users * items)
};

// Per-user chronological item sequences with dense ids: users 0..U-1,
// items 1..V (0 and V+1 are the PAD and MASK tokens).
struct InteractionDataset {
  std::vector<std::vector<ItemId>> sequences;
  std::vector<std::string> user_names;  // internal user -> external id
  std::vector<std::string> item_names;  // item - 1 -> external id
  std::unordered_map<std::string, std::size_t> user_lookup;
  std::unordered_map<std::string, ItemId> item_lookup;
  // Interaction counts over the training prefixes (everything but the last
  // two items of each user); index 0 unused.
  std::vector<std::size_t> popularity;

  std::size_t num_users() const { return sequences.size(); }
  std::size_t num_items() const { return item_names.size(); }
  DatasetStats stats() const;
  std::optional<ItemId> find_item(const std::string& external) const;
};

struct BuildOptions {
  std::size_t min_user_interactions = 5;
  // 0 disables item filtering; otherwise user and item filters alternate
  // until neither removes anything.
  std::size_t min_item_interactions = 0;
};

InteractionDataset build_dataset(std::span<const InteractionRecord> records, const BuildOptions& options = {});

// Internal plumbing shared by build_dataset and load_dataset.
void assign_popularity(InteractionDataset& dataset);

struct UserSplit {
  std::vector<ItemId> train;  // S_u[1 .. n-2]
  ItemId validation = 0;      // S_u[n-1]
  ItemId test = 0;            // S_u[n]
};

struct LeaveOneOutSplit {
  std::vector<UserSplit> users;
};

// Requires every sequence to have at least 3 items (guaranteed by the
// default 5-interaction filter).
LeaveOneOutSplit leave_one_out(const InteractionDataset& dataset);

struct MaskedSequence {
  std::vector<TokenId> ids;
  std::vector<std::size_t> label_positions;  // ascending
  std::vector<ItemId> labels;
};

// max(1, floor(rho * length)).
std::size_t cloze_mask_count(std::size_t length, double rho);

// Replaces cloze_mask_count(len, rho) uniformly chosen positions with MASK.
MaskedSequence cloze_mask(std::span<const ItemId> sequence, double rho, std::size_t num_items, Rng& rng);
// Same with an explicit number of masked positions (clamped to the length).
MaskedSequence cloze_mask_exact(std::span<const ItemId> sequence, std::size_t count, std::size_t num_items, Rng& rng);
MaskedSequence last_item_mask(std::span<const ItemId> sequence, std::size_t num_items);

// Padded training unit for the Cloze objective.
struct MaskedBatch {
  TokenBatch input;
  std::vector<std::vector<std::size_t>> label_positions;  // per row
  std::vector<std::vector<ItemId>> labels;                // per row
  std::vector<bool> pad_flags;                            // rows x N

  std::size_t rows() const { return input.rows; }
  std::size_t num_labels() const;
  // Throws ContractError if a labeled slot is not MASK, a PAD slot is
  // labeled, or some row has no label.
  void check_invariants(std::size_t num_items) const;
};

// Pads/truncates a masked sequence to `max_len` and appends it to the batch.
void append_instance(MaskedBatch& batch, const MaskedSequence& instance, std::size_t max_len);

struct BatchOptions {
  std::size_t max_len = 200;
  double mask_proportion = 0.2;
  std::size_t masks_per_sequence = 0;   // > 0 overrides mask_proportion
  std::size_t last_item_instances = 1;  // extra last-item-masked rows per user
  std::size_t batch_size = 256;
};

// One epoch of training rows: per user a fresh Cloze instance over the last
// max_len training items plus `last_item_instances` last-item instances,
// shuffled with the epoch seed and cut into batches (last one ragged).
std::vector<MaskedBatch> make_training_batches(const LeaveOneOutSplit& split, std::size_t num_items,
                                               const BatchOptions& options, std::uint64_t epoch_seed);

// Preprocessed dataset file: `users=<n> items=<n> actions=<n>` then one
// `user<TAB>item,item,...` line per user (internal ids). The vocabulary file
// holds `user<TAB>internal<TAB>external` and `item<TAB>internal<TAB>external`.
void save_dataset(const InteractionDataset& dataset, const std::filesystem::path& dataset_file,
                  const std::filesystem::path& vocab_file);
InteractionDataset load_dataset(const std::filesystem::path& dataset_file,
                                const std::optional<std::filesystem::path>& vocab_file = std::nullopt);

// CRC-32 of the file bytes.
std::uint64_t file_fingerprint(const std::filesystem::path& path);

// Table-style stats block: header row plus one row for `name`.
std::string format_stats_table(const std::string& name, const DatasetStats& stats);

}  // namespace bert4rec
