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

#include "bert4rec/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bert4rec/errors.hpp"
#include "bert4rec/sampler.hpp"
#include "json.hpp"

namespace bert4rec {

std::string_view to_string(EvalSplit split) { return split == EvalSplit::kTest ? "test" : "validation"; }

EvalSplit parse_eval_split(std::string_view text) {
  if (text == "test") return EvalSplit::kTest;
  if (text == "validation" || text == "val") return EvalSplit::kValidation;
  throw ConfigError("unknown split '" + std::string(text) + "' (expected test or validation)");
}

std::vector<std::vector<double>> ModelScorer::score(std::span<const EvalQuery> queries) const {
  std::vector<std::vector<double>> out;
  out.reserve(queries.size());
  const std::size_t step = std::max<std::size_t>(1, batch_size_);
  for (std::size_t begin = 0; begin < queries.size(); begin += step) {
    const std::size_t end = std::min(queries.size(), begin + step);
    std::vector<std::vector<ItemId>> histories;
    histories.reserve(end - begin);
    for (std::size_t q = begin; q < end; ++q) {
      histories.emplace_back(queries[q].history.begin(), queries[q].history.end());
    }
    const Tensor logits = model_.next_item_logits(histories);
    const std::size_t v = logits.dim(1);
    for (std::size_t q = begin; q < end; ++q) {
      std::vector<double> scores;
      scores.reserve(queries[q].candidates.size());
      for (ItemId item : queries[q].candidates) {
        if (item < 1 || item > v) throw IndexError("candidate item " + std::to_string(item) + " out of range");
        scores.push_back(logits[(q - begin) * v + item - 1]);
      }
      out.push_back(std::move(scores));
    }
  }
  return out;
}

std::vector<std::vector<double>> PopScorer::score(std::span<const EvalQuery> queries) const {
  std::vector<std::vector<double>> out;
  out.reserve(queries.size());
  for (const EvalQuery& q : queries) {
    std::vector<double> scores;
    scores.reserve(q.candidates.size());
    for (ItemId item : q.candidates) {
      if (item < 1 || item >= popularity_.size()) throw IndexError("candidate item out of range");
      scores.push_back(static_cast<double>(popularity_[item]));
    }
    out.push_back(std::move(scores));
  }
  return out;
}

std::size_t rank_target(std::span<const double> scores, std::size_t target_index) {
  if (target_index >= scores.size()) throw IndexError("target index outside the candidate list");
  const double target = scores[target_index];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ContractError("non-finite candidate score");
    if (i != target_index && scores[i] >= target) ++rank;
  }
  return rank;
}

double hr_at_k(std::size_t rank, std::size_t k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at_k(std::size_t rank, std::size_t k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

double mrr(std::size_t rank) { return 1.0 / static_cast<double>(rank); }

EvalReport summarize(std::vector<RankedCase> cases) {
  EvalReport report;
  static constexpr std::size_t kCutoffs[] = {1, 5, 10};
  for (std::size_t k : kCutoffs) {
    report.metrics["HR@" + std::to_string(k)] = 0.0;
    report.metrics["NDCG@" + std::to_string(k)] = 0.0;
  }
  report.metrics["MRR"] = 0.0;
  if (cases.empty()) {
    report.cases = std::move(cases);
    return report;
  }
  for (const RankedCase& c : cases) {
    for (std::size_t k : kCutoffs) {
      report.metrics["HR@" + std::to_string(k)] += hr_at_k(c.rank, k);
      report.metrics["NDCG@" + std::to_string(k)] += ndcg_at_k(c.rank, k);
    }
    report.metrics["MRR"] += mrr(c.rank);
  }
  for (auto& [name, value] : report.metrics) value /= static_cast<double>(cases.size());
  report.cases = std::move(cases);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["users"] = cases.size();
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [name, value] : metrics) m[name] = value;
  j["metrics"] = m;
  return j.dump(2) + "\n";
}

std::string EvalReport::ranks_tsv(const InteractionDataset* dataset) const {
  std::ostringstream out;
  out << "user\trank\n";
  for (const RankedCase& c : cases) {
    if (dataset != nullptr && c.user < dataset->user_names.size()) {
      out << dataset->user_names[c.user];
    } else {
      out << c.user;
    }
    out << '\t' << c.rank << '\n';
  }
  return out.str();
}

std::vector<ItemId> evaluation_history(const UserSplit& user, EvalSplit which) {
  std::vector<ItemId> history = user.train;
  if (which == EvalSplit::kTest) history.push_back(user.validation);
  return history;
}

std::vector<ItemId> evaluation_candidates(const InteractionDataset& dataset, const LeaveOneOutSplit& split,
                                          EvalSplit which, std::size_t user, std::uint64_t seed,
                                          std::size_t num_negatives) {
  const UserSplit& u = split.users.at(user);
  const std::string purpose = which == EvalSplit::kTest ? "negatives/test" : "negatives/validation";
  Rng rng(derive_seed(seed, purpose, user));
  std::vector<ItemId> candidates;
  candidates.reserve(num_negatives + 1);
  candidates.push_back(which == EvalSplit::kTest ? u.test : u.validation);
  const std::vector<ItemId> negatives = popularity_negatives(dataset, user, num_negatives, rng);
  candidates.insert(candidates.end(), negatives.begin(), negatives.end());
  return candidates;
}

EvalReport evaluate(const Scorer& scorer, const InteractionDataset& dataset, const LeaveOneOutSplit& split,
                    EvalSplit which, std::uint64_t seed, std::size_t num_negatives) {
  if (split.users.size() != dataset.num_users()) throw MismatchError("split does not match the dataset");
  const std::size_t n = split.users.size();
  std::vector<std::vector<ItemId>> histories(n);
  std::vector<RankedCase> cases(n);
  std::vector<EvalQuery> queries;
  queries.reserve(n);
  for (std::size_t u = 0; u < n; ++u) {
    histories[u] = evaluation_history(split.users[u], which);
    cases[u].user = u;
    cases[u].candidates = evaluation_candidates(dataset, split, which, u, seed, num_negatives);
  }
  for (std::size_t u = 0; u < n; ++u) queries.push_back({u, histories[u], cases[u].candidates});
  std::vector<std::vector<double>> scores = scorer.score(queries);
  if (scores.size() != n) throw ContractError("scorer returned the wrong number of score vectors");
  for (std::size_t u = 0; u < n; ++u) {
    if (scores[u].size() != cases[u].candidates.size()) throw ContractError("scorer returned a ragged score vector");
    cases[u].rank = rank_target(scores[u], 0);
    cases[u].scores = std::move(scores[u]);
  }
  return summarize(std::move(cases));
}

}  // namespace bert4rec
