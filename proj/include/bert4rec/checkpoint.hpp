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
#include <string>
#include <vector>

#include "bert4rec/model.hpp"
#include "bert4rec/optimizer.hpp"

namespace bert4rec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything needed to resume training bit-exactly or to serve a model.
//
// On disk: 8-byte magic, u32 version, u32 CRC-32 of the payload, u64 payload
// size, payload. The payload is a length-prefixed key=value text block
// (model config, trainer settings, counters) followed by the named tensors
// (parameters, then Adam moments) as name, rank, u64 extents, and
// little-endian IEEE-754 doubles.
struct Checkpoint {
  ModelConfig model;
  ModelParams params;
  OptimizerState optimizer;
  KeyValues trainer_settings;
  std::string rng_state;  // dropout stream
  std::size_t epoch = 0;  // completed epochs
  std::uint64_t dataset_fingerprint = 0;
  double best_validation = -1.0;  // best validation NDCG@10 so far, -1 if none
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws IntegrityError on corruption, MismatchError on a version mismatch.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// As above, but rejects a checkpoint whose model config differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace bert4rec
