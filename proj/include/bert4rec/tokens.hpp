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

namespace bert4rec {

// Item ids are 1..num_items. Token ids add two reserved rows of the item
// embedding table: PAD (0) and MASK (num_items + 1).
using ItemId = std::size_t;
using TokenId = std::size_t;

inline constexpr TokenId kPadToken = 0;

inline constexpr TokenId mask_token(std::size_t num_items) { return num_items + 1; }

// Keeps the last `length` ids, or left-pads with PAD so the most recent id
// sits at position length - 1.
inline std::vector<TokenId> pad_truncate(std::span<const TokenId> ids, std::size_t length) {
  std::vector<TokenId> out(length, kPadToken);
  const std::size_t kept = ids.size() < length ? ids.size() : length;
  for (std::size_t i = 0; i < kept; ++i) out[length - kept + i] = ids[ids.size() - kept + i];
  return out;
}

// Fixed-length token matrix, row-major.
struct TokenBatch {
  std::size_t rows = 0;
  std::size_t length = 0;
  std::vector<TokenId> ids;

  std::span<const TokenId> row(std::size_t r) const { return {ids.data() + r * length, length}; }
  void push_row(std::span<const TokenId> row_ids);
};

inline void TokenBatch::push_row(std::span<const TokenId> row_ids) {
  ids.insert(ids.end(), row_ids.begin(), row_ids.end());
  ++rows;
}

}  // namespace bert4rec
