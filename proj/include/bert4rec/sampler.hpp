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
#include <span>
#include <vector>

#include "bert4rec/data.hpp"
#include "bert4rec/rng.hpp"

namespace bert4rec {

// Draws `count` distinct indices without replacement, each draw proportional
// to `weights` among the indices not excluded and not yet drawn. When the
// positive-weight pool runs dry the remainder is filled uniformly from the
// allowed zero-weight indices. Throws CandidateShortageError if fewer than
// `count` indices are allowed.
std::vector<std::size_t> sample_by_weight(std::span<const double> weights, std::span<const bool> excluded,
                                          std::size_t count, Rng& rng);

// `count` negatives for `user`: items outside the user's full history
// (target included), drawn by training popularity.
std::vector<ItemId> popularity_negatives(const InteractionDataset& dataset, std::size_t user, std::size_t count,
                                         Rng& rng);

}  // namespace bert4rec
