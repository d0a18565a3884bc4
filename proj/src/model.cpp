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

#include "bert4rec/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

#include "bert4rec/errors.hpp"

namespace bert4rec {

std::string_view to_string(AttentionMode mode) {
  return mode == AttentionMode::kCausal ? "causal" : "bidirectional";
}

AttentionMode parse_attention_mode(std::string_view text) {
  if (text == "bidirectional") return AttentionMode::kBidirectional;
  if (text == "causal") return AttentionMode::kCausal;
  throw ConfigError("unknown attention mode '" + std::string(text) + "' (expected bidirectional or causal)");
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

const std::string& require_key(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::size_t parse_size(const KeyValues& kv, const std::string& key) {
  const std::string& text = require_key(kv, key);
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || text[0] == '-') {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return static_cast<std::size_t>(value);
}

double parse_real(const KeyValues& kv, const std::string& key) {
  const std::string& text = require_key(kv, key);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + text + "'");
  }
  return value;
}

bool parse_flag(const KeyValues& kv, const std::string& key) {
  const std::string& text = require_key(kv, key);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + text + "'");
}

}  // namespace

void ModelConfig::validate() const {
  if (num_heads == 0 || hidden_dim == 0) throw ConfigError("num_heads and hidden_dim must be positive");
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  if (num_items == 0) throw ConfigError("num_items must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0, 1)");
  if (!(mask_proportion > 0.0 && mask_proportion < 1.0)) throw ConfigError("mask_proportion must lie in (0, 1)");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
}

KeyValues ModelConfig::to_key_values() const {
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  return {
      {"model.num_layers", std::to_string(num_layers)},
      {"model.num_heads", std::to_string(num_heads)},
      {"model.hidden_dim", std::to_string(hidden_dim)},
      {"model.max_len", std::to_string(max_len)},
      {"model.num_items", std::to_string(num_items)},
      {"model.dropout_p", format_double(dropout_p)},
      {"model.mask_proportion", format_double(mask_proportion)},
      {"model.attention_mode", std::string(to_string(attention_mode))},
      {"model.use_positional_embedding", flag(use_positional_embedding)},
      {"model.use_pffn", flag(use_pffn)},
      {"model.use_layer_norm", flag(use_layer_norm)},
      {"model.use_residual", flag(use_residual)},
      {"model.use_dropout", flag(use_dropout)},
      {"model.layer_norm_eps", format_double(layer_norm_eps)},
  };
}

ModelConfig ModelConfig::from_key_values(const KeyValues& kv) {
  ModelConfig c;
  c.num_layers = parse_size(kv, "model.num_layers");
  c.num_heads = parse_size(kv, "model.num_heads");
  c.hidden_dim = parse_size(kv, "model.hidden_dim");
  c.max_len = parse_size(kv, "model.max_len");
  c.num_items = parse_size(kv, "model.num_items");
  c.dropout_p = parse_real(kv, "model.dropout_p");
  c.mask_proportion = parse_real(kv, "model.mask_proportion");
  c.attention_mode = parse_attention_mode(require_key(kv, "model.attention_mode"));
  c.use_positional_embedding = parse_flag(kv, "model.use_positional_embedding");
  c.use_pffn = parse_flag(kv, "model.use_pffn");
  c.use_layer_norm = parse_flag(kv, "model.use_layer_norm");
  c.use_residual = parse_flag(kv, "model.use_residual");
  c.use_dropout = parse_flag(kv, "model.use_dropout");
  c.layer_norm_eps = parse_real(kv, "model.layer_norm_eps");
  return c;
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.hidden_dim;
  const std::size_t dh = config.head_dim();
  ModelParams p;
  p.item_embeddings = Tensor::zeros({config.vocab_rows(), d}, true);
  p.positional_embeddings = Tensor::zeros({config.max_len, d}, true);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    LayerParams layer;
    for (std::size_t h = 0; h < config.num_heads; ++h) {
      layer.query.push_back(Tensor::zeros({d, dh}, true));
      layer.key.push_back(Tensor::zeros({d, dh}, true));
      layer.value.push_back(Tensor::zeros({d, dh}, true));
    }
    layer.output = Tensor::zeros({d, d}, true);
    layer.ffn_w1 = Tensor::zeros({d, 4 * d}, true);
    layer.ffn_b1 = Tensor::zeros({4 * d}, true);
    layer.ffn_w2 = Tensor::zeros({4 * d, d}, true);
    layer.ffn_b2 = Tensor::zeros({d}, true);
    layer.attention_norm_gain = Tensor::full({d}, 1.0, true);
    layer.attention_norm_bias = Tensor::zeros({d}, true);
    layer.ffn_norm_gain = Tensor::full({d}, 1.0, true);
    layer.ffn_norm_bias = Tensor::zeros({d}, true);
    p.layers.push_back(std::move(layer));
  }
  p.head_weight = Tensor::zeros({d, d}, true);
  p.head_bias = Tensor::zeros({d}, true);
  p.output_bias = Tensor::zeros({config.num_items}, true);
  return p;
}

std::vector<NamedParam> ModelParams::named() const {
  std::vector<NamedParam> out;
  out.push_back({"item_embeddings", item_embeddings, true});
  out.push_back({"positional_embeddings", positional_embeddings, true});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerParams& layer = layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t h = 0; h < layer.query.size(); ++h) {
      const std::string head = ".head" + std::to_string(h);
      out.push_back({prefix + "attention.query" + head, layer.query[h], true});
      out.push_back({prefix + "attention.key" + head, layer.key[h], true});
      out.push_back({prefix + "attention.value" + head, layer.value[h], true});
    }
    out.push_back({prefix + "attention.output", layer.output, true});
    out.push_back({prefix + "attention_norm.gain", layer.attention_norm_gain, false});
    out.push_back({prefix + "attention_norm.bias", layer.attention_norm_bias, false});
    out.push_back({prefix + "ffn.w1", layer.ffn_w1, true});
    out.push_back({prefix + "ffn.b1", layer.ffn_b1, false});
    out.push_back({prefix + "ffn.w2", layer.ffn_w2, true});
    out.push_back({prefix + "ffn.b2", layer.ffn_b2, false});
    out.push_back({prefix + "ffn_norm.gain", layer.ffn_norm_gain, false});
    out.push_back({prefix + "ffn_norm.bias", layer.ffn_norm_bias, false});
  }
  out.push_back({"head.weight", head_weight, true});
  out.push_back({"head.bias", head_bias, false});
  out.push_back({"output_bias", output_bias, false});
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams p;
  p.item_embeddings = item_embeddings.clone();
  p.positional_embeddings = positional_embeddings.clone();
  for (const LayerParams& layer : layers) {
    LayerParams c;
    for (const Tensor& t : layer.query) c.query.push_back(t.clone());
    for (const Tensor& t : layer.key) c.key.push_back(t.clone());
    for (const Tensor& t : layer.value) c.value.push_back(t.clone());
    c.output = layer.output.clone();
    c.ffn_w1 = layer.ffn_w1.clone();
    c.ffn_b1 = layer.ffn_b1.clone();
    c.ffn_w2 = layer.ffn_w2.clone();
    c.ffn_b2 = layer.ffn_b2.clone();
    c.attention_norm_gain = layer.attention_norm_gain.clone();
    c.attention_norm_bias = layer.attention_norm_bias.clone();
    c.ffn_norm_gain = layer.ffn_norm_gain.clone();
    c.ffn_norm_bias = layer.ffn_norm_bias.clone();
    p.layers.push_back(std::move(c));
  }
  p.head_weight = head_weight.clone();
  p.head_bias = head_bias.clone();
  p.output_bias = output_bias.clone();
  return p;
}

Tensor embed_sequence(const ModelParams& params, const ModelConfig& config, const TokenBatch& batch) {
  if (batch.length != config.max_len || batch.ids.size() != batch.rows * batch.length) {
    throw ContractError("embed_sequence: expected rows of length " + std::to_string(config.max_len) + ", got " +
                        std::to_string(batch.length));
  }
  Tensor items = embedding_lookup(params.item_embeddings, batch.ids);
  if (!config.use_positional_embedding) return items;
  std::vector<std::size_t> positions(batch.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i % batch.length;
  return add(items, embedding_lookup(params.positional_embeddings, positions));
}

Tensor build_attention_mask(AttentionMode mode, std::span<const bool> pad_flags) {
  const std::size_t n = pad_flags.size();
  std::vector<double> mask(n * n, kBlocked);
  for (std::size_t i = 0; i < n; ++i) {
    if (pad_flags[i]) {
      mask[i * n + i] = 0.0;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (pad_flags[j]) continue;
      if (mode == AttentionMode::kCausal && j > i) continue;
      mask[i * n + j] = 0.0;
    }
  }
  return Tensor::from({n, n}, std::move(mask));
}

Tensor build_attention_mask(AttentionMode mode, const TokenBatch& batch) {
  const std::size_t n = batch.length;
  std::vector<double> all;
  all.reserve(batch.rows * n * n);
  std::unique_ptr<bool[]> pads(new bool[n]);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    auto ids = batch.row(r);
    for (std::size_t i = 0; i < n; ++i) pads[i] = ids[i] == kPadToken;
    Tensor single = build_attention_mask(mode, std::span<const bool>(pads.get(), n));
    all.insert(all.end(), single.values().begin(), single.values().end());
  }
  return Tensor::from({batch.rows, n, n}, std::move(all));
}

Tensor multi_head_self_attention(const Tensor& hidden, const Tensor& mask, const LayerParams& layer,
                                 const ModelConfig& config, std::vector<Tensor>* head_weights) {
  const std::size_t n = mask.dim(mask.rank() - 1);
  const std::size_t rows = mask.rank() == 3 ? mask.dim(0) : 1;
  const std::size_t dh = config.head_dim();
  if (hidden.rank() != 2 || hidden.dim(0) != rows * n || hidden.dim(1) != config.hidden_dim) {
    throw DimensionError("multi_head_self_attention: hidden " + shape_str(hidden.shape()) + " does not match mask " +
                         shape_str(mask.shape()));
  }
  const double temperature = std::sqrt(static_cast<double>(dh));
  Tensor total;
  for (std::size_t h = 0; h < layer.query.size(); ++h) {
    Tensor q = reshape(matmul(hidden, layer.query[h]), {rows, n, dh});
    Tensor k = reshape(matmul(hidden, layer.key[h]), {rows, n, dh});
    Tensor v = reshape(matmul(hidden, layer.value[h]), {rows, n, dh});
    Tensor scores = scale(batched_matmul(q, k, /*transpose_b=*/true), 1.0 / temperature);
    Tensor weights = softmax_masked(scores, mask);
    if (head_weights) head_weights->push_back(weights);
    Tensor context = reshape(batched_matmul(weights, v), {rows * n, dh});
    // [head_1; ...; head_h] W^O == sum_h head_h * (rows h*dh .. (h+1)*dh of W^O)
    Tensor projected = matmul(context, slice_rows(layer.output, h * dh, dh));
    total = total.defined() ? add(total, projected) : projected;
  }
  return total;
}

Tensor position_wise_ffn(const Tensor& hidden, const LayerParams& layer) {
  Tensor inner = gelu(add_bias(matmul(hidden, layer.ffn_w1), layer.ffn_b1));
  return add_bias(matmul(inner, layer.ffn_w2), layer.ffn_b2);
}

Tensor transformer_layer(const Tensor& hidden, const Tensor& mask, const LayerParams& layer,
                         const ModelConfig& config, bool training, Rng* rng, std::vector<Tensor>* head_weights) {
  const double p = config.use_dropout ? config.dropout_p : 0.0;
  auto sublayer_output = [&](const Tensor& input, const Tensor& sub, const Tensor& gain, const Tensor& bias) {
    Tensor dropped = dropout(sub, p, training, rng);
    Tensor summed = config.use_residual ? add(input, dropped) : dropped;
    return config.use_layer_norm ? layer_norm(summed, gain, bias, config.layer_norm_eps) : summed;
  };
  Tensor attended = sublayer_output(hidden, multi_head_self_attention(hidden, mask, layer, config, head_weights),
                                    layer.attention_norm_gain, layer.attention_norm_bias);
  if (!config.use_pffn) return attended;
  return sublayer_output(attended, position_wise_ffn(attended, layer), layer.ffn_norm_gain, layer.ffn_norm_bias);
}

Bert4Rec::Bert4Rec(ModelConfig config, ModelParams params) : config_(config), params_(std::move(params)) {
  config_.validate();
  const std::size_t d = config_.hidden_dim;
  auto expect = [](const Tensor& t, const Shape& shape, const std::string& what) {
    if (!t.defined() || t.shape() != shape) {
      throw MismatchError("parameter " + what + " has shape " + (t.defined() ? shape_str(t.shape()) : "<none>") +
                          ", expected " + shape_str(shape));
    }
  };
  expect(params_.item_embeddings, {config_.vocab_rows(), d}, "item_embeddings");
  expect(params_.positional_embeddings, {config_.max_len, d}, "positional_embeddings");
  if (params_.layers.size() != config_.num_layers) throw MismatchError("parameter layer count differs from config");
  for (const LayerParams& layer : params_.layers) {
    if (layer.query.size() != config_.num_heads) throw MismatchError("parameter head count differs from config");
    for (std::size_t h = 0; h < config_.num_heads; ++h) {
      expect(layer.query[h], {d, config_.head_dim()}, "query");
      expect(layer.key[h], {d, config_.head_dim()}, "key");
      expect(layer.value[h], {d, config_.head_dim()}, "value");
    }
    expect(layer.output, {d, d}, "attention.output");
    expect(layer.ffn_w1, {d, 4 * d}, "ffn.w1");
    expect(layer.ffn_w2, {4 * d, d}, "ffn.w2");
  }
  expect(params_.head_weight, {d, d}, "head.weight");
  expect(params_.output_bias, {config_.num_items}, "output_bias");
}

Tensor Bert4Rec::forward(const TokenBatch& batch, bool training, Rng* rng, AttentionTrace* trace) const {
  Tensor hidden = embed_sequence(params_, config_, batch);
  if (params_.layers.empty()) return hidden;
  Tensor mask = build_attention_mask(config_.attention_mode, batch);
  if (trace) trace->assign(params_.layers.size(), {});
  for (std::size_t l = 0; l < params_.layers.size(); ++l) {
    hidden = transformer_layer(hidden, mask, params_.layers[l], config_, training, rng,
                               trace ? &(*trace)[l] : nullptr);
  }
  return hidden;
}

Tensor Bert4Rec::output_logits(const Tensor& hidden_rows) const {
  Tensor transformed = gelu(add_bias(matmul(hidden_rows, params_.head_weight), params_.head_bias));
  // Only the real item rows of the shared table are scored.
  Tensor item_rows = slice_rows(params_.item_embeddings, 1, config_.num_items);
  return add_bias(matmul_nt(transformed, item_rows), params_.output_bias);
}

std::vector<TokenId> Bert4Rec::prediction_input(std::span<const ItemId> history) const {
  if (history.empty()) throw ContractError("prediction_input: empty history");
  const std::size_t kept = std::min(history.size(), config_.max_len - 1);
  std::vector<TokenId> ids(history.end() - static_cast<std::ptrdiff_t>(kept), history.end());
  for (ItemId item : ids) {
    if (item == kPadToken || item > config_.num_items) {
      throw IndexError("prediction_input: item id " + std::to_string(item) + " is not a catalog item");
    }
  }
  ids.push_back(mask_token(config_.num_items));
  return pad_truncate(ids, config_.max_len);
}

Tensor Bert4Rec::next_item_logits(std::span<const std::vector<ItemId>> histories) const {
  TokenBatch batch;
  batch.length = config_.max_len;
  for (const auto& history : histories) batch.push_row(prediction_input(history));
  Tensor hidden = forward(batch, /*training=*/false, nullptr);
  std::vector<std::size_t> rows(batch.rows);
  for (std::size_t r = 0; r < batch.rows; ++r) rows[r] = r * batch.length + batch.length - 1;
  return output_logits(embedding_lookup(hidden, rows));
}

std::vector<ScoredItem> Bert4Rec::predict_next(std::span<const ItemId> history, std::size_t top_k) const {
  std::vector<std::vector<ItemId>> one{std::vector<ItemId>(history.begin(), history.end())};
  Tensor logits = next_item_logits(one);
  const std::size_t v = config_.num_items;
  auto z = logits.values();
  const double peak = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (double x : z) denom += std::exp(x - peak);
  std::vector<ScoredItem> scored(v);
  for (std::size_t j = 0; j < v; ++j) scored[j] = {j + 1, z[j], std::exp(z[j] - peak) / denom};
  const std::size_t k = std::min(top_k, v);
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const ScoredItem& a, const ScoredItem& b) {
                      if (a.logit != b.logit) return a.logit > b.logit;
                      return a.item < b.item;
                    });
  scored.resize(k);
  return scored;
}

std::vector<std::vector<Tensor>> Bert4Rec::attention_maps(std::span<const TokenId> ids) const {
  TokenBatch batch;
  batch.length = config_.max_len;
  batch.push_row(ids);
  AttentionTrace trace;
  forward(batch, /*training=*/false, nullptr, &trace);
  const std::size_t n = config_.max_len;
  for (auto& heads : trace) {
    for (Tensor& t : heads) t = reshape(t, {n, n});
  }
  return trace;
}

}  // namespace bert4rec
