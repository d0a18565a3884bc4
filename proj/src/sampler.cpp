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

#include "bert4rec/sampler.hpp"

#include <algorithm>
#include <memory>

#include "bert4rec/errors.hpp"

namespace bert4rec {

std::vector<std::size_t> sample_by_weight(std::span<const double> weights, std::span<const bool> excluded,
                                          std::size_t count, Rng& rng) {
  const std::size_t n = weights.size();
  if (excluded.size() != n) throw ContractError("sample_by_weight: exclusion mask size differs from weights");
  std::vector<bool> taken(excluded.begin(), excluded.end());
  std::size_t allowed = 0, positive = 0;
  double positive_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (taken[i]) continue;
    ++allowed;
    if (weights[i] > 0.0) {
      ++positive;
      positive_mass += weights[i];
    }
  }
  if (allowed < count) {
    throw CandidateShortageError("only " + std::to_string(allowed) + " candidates available, " +
                                 std::to_string(count) + " requested");
  }

  std::vector<double> cdf(n);
  double running = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    running += std::max(0.0, weights[i]);
    cdf[i] = running;
  }
  const double total = running;

  std::vector<std::size_t> out;
  out.reserve(count);
  const std::size_t from_weights = std::min(count, positive);
  // Rejection against the full distribution is exact and cheap while the
  // excluded mass is small; past the attempt cap fall back to direct
  // sampling over what remains.
  std::size_t attempts = 0;
  const std::size_t max_attempts = 32 * (from_weights + 1);
  while (out.size() < from_weights && attempts < max_attempts) {
    ++attempts;
    const double u = rng.uniform() * total;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (i >= n) i = n - 1;
    if (taken[i] || weights[i] <= 0.0) continue;
    taken[i] = true;
    positive_mass -= weights[i];
    out.push_back(i);
  }
  while (out.size() < from_weights) {
    double u = rng.uniform() * positive_mass;
    std::size_t pick = n;
    std::size_t last = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i] || weights[i] <= 0.0) continue;
      last = i;
      if (u < weights[i]) {
        pick = i;
        break;
      }
      u -= weights[i];
    }
    if (pick == n) pick = last;  // rounding at the top end
    taken[pick] = true;
    positive_mass -= weights[pick];
    out.push_back(pick);
  }
  if (out.size() < count) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) rest.push_back(i);
    }
    for (std::size_t i = 0; out.size() < count; ++i) {
      std::swap(rest[i], rest[i + rng.uniform_index(rest.size() - i)]);
      out.push_back(rest[i]);
    }
  }
  return out;
}

std::vector<ItemId> popularity_negatives(const InteractionDataset& dataset, std::size_t user, std::size_t count,
                                         Rng& rng) {
  if (user >= dataset.num_users()) throw IndexError("popularity_negatives: unknown user " + std::to_string(user));
  const std::size_t v = dataset.num_items();
  std::vector<double> weights(v);
  for (std::size_t i = 0; i < v; ++i) weights[i] = static_cast<double>(dataset.popularity[i + 1]);
  std::unique_ptr<bool[]> excluded(new bool[v]());
  for (ItemId item : dataset.sequences[user]) excluded[item - 1] = true;
  try {
    auto picks = sample_by_weight(weights, std::span<const bool>(excluded.get(), v), count, rng);
    std::vector<ItemId> items(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i) items[i] = picks[i] + 1;
    return items;
  } catch (const CandidateShortageError& e) {
    throw CandidateShortageError("user " + dataset.user_names[user] + ": " + e.what());
  }
}

}  // namespace bert4rec
