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

#include "bert4rec/model.hpp"

namespace bert4rec {

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  bool operator==(const AdamHyper&) const = default;
};

// First and second moments, aligned with ModelParams::named().
struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;

  static OptimizerState zeros(std::span<const NamedParam> params);
  bool operator==(const OptimizerState&) const = default;
};

// Bias-corrected Adam with decoupled weight decay on `decay` parameters.
// Parameters without a gradient buffer are treated as having zero gradient.
void adam_step(std::span<const NamedParam> params, OptimizerState& state, const AdamHyper& hyper);

// Rescales all gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm measured before clipping.
double clip_global_norm(std::span<const NamedParam> params, double max_norm);

// Linear decay from `base` at step 0 to 0 at `total_steps`.
double lr_at(std::size_t step, std::size_t total_steps, double base);

}  // namespace bert4rec
