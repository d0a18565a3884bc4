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

#include "bert4rec/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "bert4rec/errors.hpp"

namespace bert4rec {
namespace {

constexpr char kMagic[8] = {'B', '4', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 8;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

void put_tensor(std::string& out, const std::string& name, const Shape& shape, std::span<const double> values) {
  put_string(out, name);
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u64(out, d);
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  std::uint64_t u(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string str() {
    const std::size_t n = u(4);
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IntegrityError("checkpoint payload is truncated");
  }

  const std::string& bytes_;
  std::size_t pos_;
};

std::string kv_text(const KeyValues& kv) {
  std::string text;
  for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
  return text;
}

KeyValues parse_kv_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IntegrityError("malformed checkpoint config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::uint32_t crc_of(const std::string& bytes, std::size_t begin) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* data = reinterpret_cast<const Bytef*>(bytes.data() + begin);
  std::size_t left = bytes.size() - begin;
  while (left > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::size_t parse_count(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IntegrityError("checkpoint is missing '" + key + "'");
  try {
    return static_cast<std::size_t>(std::stoull(it->second));
  } catch (const std::exception&) {
    throw IntegrityError("checkpoint has a malformed '" + key + "'");
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  KeyValues kv = checkpoint.model.to_key_values();
  for (const auto& [k, v] : checkpoint.trainer_settings) kv["trainer." + k] = v;
  kv["state.epoch"] = std::to_string(checkpoint.epoch);
  kv["state.step"] = std::to_string(checkpoint.optimizer.step);
  kv["state.dataset_fingerprint"] = std::to_string(checkpoint.dataset_fingerprint);
  kv["state.best_validation"] = format_double(checkpoint.best_validation);

  const std::vector<NamedParam> named = checkpoint.params.named();
  const bool with_moments = !checkpoint.optimizer.first_moment.empty();
  if (with_moments && (checkpoint.optimizer.first_moment.size() != named.size() ||
                       checkpoint.optimizer.second_moment.size() != named.size())) {
    throw MismatchError("optimizer state does not match the parameter list");
  }

  std::string payload;
  put_string(payload, kv_text(kv));
  put_string(payload, checkpoint.rng_state);
  put_u32(payload, static_cast<std::uint32_t>(with_moments ? 3 * named.size() : named.size()));
  for (const NamedParam& p : named) put_tensor(payload, p.name, p.tensor.shape(), p.tensor.values());
  if (with_moments) {
    for (std::size_t i = 0; i < named.size(); ++i) {
      put_tensor(payload, "adam.m/" + named[i].name, named[i].tensor.shape(), checkpoint.optimizer.first_moment[i]);
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      put_tensor(payload, "adam.v/" + named[i].name, named[i].tensor.shape(), checkpoint.optimizer.second_moment[i]);
    }
  }

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, crc_of(payload, 0));
  put_u64(out, payload.size());
  out += payload;
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IntegrityError("not a bert4rec checkpoint (bad magic)");
  }
  Reader header(bytes, sizeof kMagic);
  const auto version = static_cast<std::uint32_t>(header.u(4));
  if (version != kCheckpointVersion) {
    throw MismatchError("checkpoint format version " + std::to_string(version) + ", expected " +
                        std::to_string(kCheckpointVersion));
  }
  const auto crc = static_cast<std::uint32_t>(header.u(4));
  const std::uint64_t size = header.u(8);
  if (bytes.size() - kHeaderBytes != size) throw IntegrityError("checkpoint is truncated or has trailing bytes");
  if (crc_of(bytes, kHeaderBytes) != crc) throw IntegrityError("checkpoint checksum mismatch");

  Reader in(bytes, kHeaderBytes);
  const KeyValues kv = parse_kv_text(in.str());
  Checkpoint ck;
  KeyValues model_kv;
  for (const auto& [k, v] : kv) {
    if (k.rfind("model.", 0) == 0) {
      model_kv[k] = v;
    } else if (k.rfind("trainer.", 0) == 0) {
      ck.trainer_settings[k.substr(8)] = v;
    }
  }
  try {
    ck.model = ModelConfig::from_key_values(model_kv);
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint config is invalid: ") + e.what());
  }
  ck.epoch = parse_count(kv, "state.epoch");
  ck.optimizer.step = parse_count(kv, "state.step");
  ck.dataset_fingerprint = parse_count(kv, "state.dataset_fingerprint");
  try {
    ck.best_validation = std::stod(kv.count("state.best_validation") ? kv.at("state.best_validation") : "-1");
  } catch (const std::exception&) {
    throw IntegrityError("checkpoint has a malformed 'state.best_validation'");
  }
  ck.rng_state = in.str();

  ck.params = ModelParams::zeros(ck.model);
  const std::vector<NamedParam> named = ck.params.named();
  const std::size_t count = in.u(4);
  if (count != named.size() && count != 3 * named.size()) throw IntegrityError("unexpected tensor count");

  auto read_into = [&](const std::string& expected_name, const Shape& expected_shape, std::span<double> dst) {
    const std::string name = in.str();
    if (name != expected_name) throw MismatchError("checkpoint tensor '" + name + "', expected '" + expected_name + "'");
    Shape shape(in.u(4));
    for (std::size_t& d : shape) d = in.u(8);
    if (shape != expected_shape) {
      throw MismatchError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                          shape_str(expected_shape));
    }
    for (double& v : dst) v = std::bit_cast<double>(in.u(8));
  };

  for (const NamedParam& p : named) {
    Tensor t = p.tensor;
    read_into(p.name, t.shape(), t.mutable_values());
  }
  if (count == 3 * named.size()) {
    ck.optimizer.first_moment.resize(named.size());
    ck.optimizer.second_moment.resize(named.size());
    for (std::size_t i = 0; i < named.size(); ++i) {
      ck.optimizer.first_moment[i].assign(named[i].tensor.numel(), 0.0);
      read_into("adam.m/" + named[i].name, named[i].tensor.shape(), ck.optimizer.first_moment[i]);
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      ck.optimizer.second_moment[i].assign(named[i].tensor.numel(), 0.0);
      read_into("adam.v/" + named[i].name, named[i].tensor.shape(), ck.optimizer.second_moment[i]);
    }
  }
  if (!in.done()) throw IntegrityError("checkpoint has unread trailing data");
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.model == expected)) {
    const KeyValues have = ck.model.to_key_values();
    std::string diff;
    for (const auto& [k, v] : expected.to_key_values()) {
      auto it = have.find(k);
      if (it == have.end() || it->second != v) {
        diff += " " + k + "=" + (it == have.end() ? std::string("?") : it->second) + " (requested " + v + ")";
      }
    }
    throw MismatchError("checkpoint " + path.string() + " was written for a different model:" + diff);
  }
  return ck;
}

}  // namespace bert4rec
