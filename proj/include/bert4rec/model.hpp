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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bert4rec/ops.hpp"
#include "bert4rec/rng.hpp"
#include "bert4rec/tensor.hpp"
#include "bert4rec/tokens.hpp"

namespace bert4rec {

enum class AttentionMode { kBidirectional, kCausal };

std::string_view to_string(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view text);

using KeyValues = std::map<std::string, std::string>;

// Round-trip exact text form of a double ("%.17g").
std::string format_double(double value);

struct ModelConfig {
  std::size_t num_layers = 2;
  std::size_t num_heads = 2;
  std::size_t hidden_dim = 64;
  std::size_t max_len = 200;
  std::size_t num_items = 0;
  double dropout_p = 0.1;
  double mask_proportion = 0.2;
  AttentionMode attention_mode = AttentionMode::kBidirectional;
  bool use_positional_embedding = true;
  bool use_pffn = true;
  bool use_layer_norm = true;
  bool use_residual = true;
  bool use_dropout = true;
  double layer_norm_eps = 1e-12;

  std::size_t head_dim() const { return hidden_dim / num_heads; }
  std::size_t vocab_rows() const { return num_items + 2; }

  // Throws ConfigError. num_layers == 0 is accepted (embedding-only model).
  void validate() const;

  KeyValues to_key_values() const;
  static ModelConfig from_key_values(const KeyValues& kv);

  bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
  std::vector<Tensor> query;  // per head, d x d/h
  std::vector<Tensor> key;
  std::vector<Tensor> value;
  Tensor output;  // d x d, applied to the concatenated heads
  Tensor ffn_w1;  // d x 4d
  Tensor ffn_b1;  // 4d
  Tensor ffn_w2;  // 4d x d
  Tensor ffn_b2;  // d
  Tensor attention_norm_gain;
  Tensor attention_norm_bias;
  Tensor ffn_norm_gain;
  Tensor ffn_norm_bias;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
  bool decay;  // subject to decoupled weight decay
};

struct ModelParams {
  Tensor item_embeddings;        // (num_items + 2) x d; rows PAD, items..., MASK
  Tensor positional_embeddings;  // max_len x d
  std::vector<LayerParams> layers;
  Tensor head_weight;  // d x d
  Tensor head_bias;    // d
  Tensor output_bias;  // num_items

  // Correctly shaped parameters: zeros everywhere except layer-norm gains (1).
  static ModelParams zeros(const ModelConfig& config);

  // Stable, ordered listing used by the optimizer and the checkpoint format.
  // Weight matrices and embedding tables decay; biases and norms do not.
  std::vector<NamedParam> named() const;

  ModelParams clone() const;
};

// Post-softmax attention weights per layer and head, each [rows, N, N].
using AttentionTrace = std::vector<std::vector<Tensor>>;

// h0 = E[id] + P[position]; returns [rows * N, d].
Tensor embed_sequence(const ModelParams& params, const ModelConfig& config, const TokenBatch& batch);

// N x N additive mask for one sequence: 0 where attending i -> j is allowed,
// kBlocked otherwise. Pad columns are blocked; pad rows attend to themselves.
Tensor build_attention_mask(AttentionMode mode, std::span<const bool> pad_flags);
// [rows, N, N] stack of per-row masks.
Tensor build_attention_mask(AttentionMode mode, const TokenBatch& batch);

// hidden is [rows * N, d]; mask is [rows, N, N] (or [N, N] for one row).
Tensor multi_head_self_attention(const Tensor& hidden, const Tensor& mask, const LayerParams& layer,
                                 const ModelConfig& config, std::vector<Tensor>* head_weights = nullptr);

Tensor position_wise_ffn(const Tensor& hidden, const LayerParams& layer);

Tensor transformer_layer(const Tensor& hidden, const Tensor& mask, const LayerParams& layer,
                         const ModelConfig& config, bool training, Rng* rng,
                         std::vector<Tensor>* head_weights = nullptr);

struct ScoredItem {
  ItemId item;
  double logit;
  double probability;
};

class Bert4Rec {
 public:
  Bert4Rec(ModelConfig config, ModelParams params);

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& mutable_params() { return params_; }

  // H^L for every position, [rows * N, d]. `rng` drives dropout and may be
  // null when !training.
  Tensor forward(const TokenBatch& batch, bool training, Rng* rng, AttentionTrace* trace = nullptr) const;

  // Pre-softmax scores over the num_items real items, [k, num_items];
  // column j belongs to item j + 1.
  Tensor output_logits(const Tensor& hidden_rows) const;

  // Test-time input: last N - 1 history items, then MASK, left-padded to N.
  std::vector<TokenId> prediction_input(std::span<const ItemId> history) const;

  // Eval-mode logits at the appended MASK position, one row per history.
  Tensor next_item_logits(std::span<const std::vector<ItemId>> histories) const;

  // Top-k items by probability, ties broken by ascending item id. k is
  // clamped to num_items.
  std::vector<ScoredItem> predict_next(std::span<const ItemId> history, std::size_t top_k) const;

  // Attention weights of one eval-mode forward pass: [layer][head] -> N x N.
  std::vector<std::vector<Tensor>> attention_maps(std::span<const TokenId> ids) const;

 private:
  ModelConfig config_;
  ModelParams params_;
};

}  // namespace bert4rec
