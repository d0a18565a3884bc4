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

#include "bert4rec/optimizer.hpp"

#include <cmath>

#include "bert4rec/errors.hpp"

namespace bert4rec {

OptimizerState OptimizerState::zeros(std::span<const NamedParam> params) {
  OptimizerState state;
  for (const NamedParam& p : params) {
    state.first_moment.emplace_back(p.tensor.numel(), 0.0);
    state.second_moment.emplace_back(p.tensor.numel(), 0.0);
  }
  return state;
}

void adam_step(std::span<const NamedParam> params, OptimizerState& state, const AdamHyper& hyper) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw MismatchError("optimizer state does not match the parameter list");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor tensor = params[i].tensor;
    std::span<double> w = tensor.mutable_values();
    std::vector<double>& m = state.first_moment[i];
    std::vector<double>& v = state.second_moment[i];
    if (m.size() != w.size() || v.size() != w.size()) throw MismatchError("moment size mismatch for " + params[i].name);
    const bool has_grad = tensor.has_grad();
    std::span<const double> g = tensor.grad();
    const double decay = params[i].decay ? hyper.weight_decay : 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has_grad ? g[j] : 0.0;
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= hyper.learning_rate * (m_hat / (std::sqrt(v_hat) + hyper.epsilon) + decay * w[j]);
    }
  }
}

double clip_global_norm(std::span<const NamedParam> params, double max_norm) {
  double sq = 0.0;
  for (const NamedParam& p : params) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double factor = max_norm / norm;
    for (const NamedParam& p : params) {
      if (!p.tensor.has_grad()) continue;
      Tensor tensor = p.tensor;
      for (double& g : tensor.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

double lr_at(std::size_t step, std::size_t total_steps, double base) {
  if (total_steps == 0 || step >= total_steps) return 0.0;
  return base * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

}  // namespace bert4rec
