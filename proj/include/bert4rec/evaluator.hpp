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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bert4rec/data.hpp"
#include "bert4rec/model.hpp"

namespace bert4rec {

enum class EvalSplit { kValidation, kTest };

std::string_view to_string(EvalSplit split);
EvalSplit parse_eval_split(std::string_view text);

// One user's ranking problem: the history fed to the scorer and the
// candidates (target first) to score.
struct EvalQuery {
  std::size_t user;
  std::span<const ItemId> history;
  std::span<const ItemId> candidates;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  // One score vector per query, aligned with its candidates.
  virtual std::vector<std::vector<double>> score(std::span<const EvalQuery> queries) const = 0;
};

// Scores candidates by the model's logits at the appended MASK position.
class ModelScorer : public Scorer {
 public:
  explicit ModelScorer(const Bert4Rec& model, std::size_t batch_size = 256) : model_(model), batch_size_(batch_size) {}
  std::vector<std::vector<double>> score(std::span<const EvalQuery> queries) const override;

 private:
  const Bert4Rec& model_;
  std::size_t batch_size_;
};

// Non-personalized baseline: score(item) = training popularity count.
class PopScorer : public Scorer {
 public:
  explicit PopScorer(const InteractionDataset& dataset) : popularity_(dataset.popularity) {}
  std::vector<std::vector<double>> score(std::span<const EvalQuery> queries) const override;

 private:
  std::vector<std::size_t> popularity_;
};

// 1 + #negatives scoring strictly higher + #negatives tied with the target
// (ties count against the target).
std::size_t rank_target(std::span<const double> scores, std::size_t target_index);

double hr_at_k(std::size_t rank, std::size_t k);
double ndcg_at_k(std::size_t rank, std::size_t k);
double mrr(std::size_t rank);

struct RankedCase {
  std::size_t user = 0;
  std::vector<ItemId> candidates;  // target first
  std::vector<double> scores;
  std::size_t rank = 0;
};

struct EvalReport {
  std::map<std::string, double> metrics;  // HR@{1,5,10}, NDCG@{1,5,10}, MRR
  std::vector<RankedCase> cases;          // audit trail in user order

  std::string to_json() const;
  // `user<TAB>rank` lines; external user ids when a dataset is given.
  std::string ranks_tsv(const InteractionDataset* dataset = nullptr) const;
};

// Averages the per-case metrics. Every metric depends only on the rank.
EvalReport summarize(std::vector<RankedCase> cases);

// History seen when predicting `which`: the training prefix for validation,
// training prefix plus the validation item for test.
std::vector<ItemId> evaluation_history(const UserSplit& user, EvalSplit which);

// Target followed by the user's deterministic popularity-sampled negatives
// (seeded from `seed`, the split, and the user id).
std::vector<ItemId> evaluation_candidates(const InteractionDataset& dataset, const LeaveOneOutSplit& split,
                                          EvalSplit which, std::size_t user, std::uint64_t seed,
                                          std::size_t num_negatives);

EvalReport evaluate(const Scorer& scorer, const InteractionDataset& dataset, const LeaveOneOutSplit& split,
                    EvalSplit which, std::uint64_t seed, std::size_t num_negatives = 100);

}  // namespace bert4rec
