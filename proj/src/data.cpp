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

#include "bert4rec/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "bert4rec/errors.hpp"

namespace bert4rec {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::optional<std::int64_t> to_int64(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::optional<double> to_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::int64_t parse_timestamp(std::string_view text, std::size_t line) {
  auto ts = to_int64(text);
  if (!ts || *ts < 0) {
    throw ParseError("line " + std::to_string(line) + ": timestamp '" + std::string(text) +
                     "' is not a non-negative integer");
  }
  return *ts;
}

// RFC 4180 records: quoted fields may hold delimiters, doubled quotes and
// line breaks. Returns (first line number, fields) pairs; blank lines skipped.
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_delimited(std::istream& in, char delimiter) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;
  auto end_field = [&] {
    fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (!(fields.empty() && !field_started && field.empty())) {
      end_field();
      records.emplace_back(record_line, std::move(fields));
    }
    fields.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == delimiter) {
      field_started = true;
      end_field();
      field_started = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      end_record();
      ++line;
      record_line = line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw ParseError("line " + std::to_string(record_line) + ": unterminated quoted field");
  end_record();
  return records;
}

}  // namespace

std::vector<InteractionRecord> parse_movielens(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_movielens(in);
}

std::vector<InteractionRecord> parse_movielens(std::istream& in) {
  std::vector<InteractionRecord> records;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    strip_cr(line);
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      auto pos = rest.find("::");
      fields.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 2);
    }
    if (fields.size() != 4 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("line " + std::to_string(number) + ": expected user::item::rating::timestamp, got '" + line +
                       "'");
    }
    auto rating = to_double(fields[2]);
    if (!rating) throw ParseError("line " + std::to_string(number) + ": rating '" + std::string(fields[2]) + "' is not a number");
    records.push_back({std::string(fields[0]), std::string(fields[1]), parse_timestamp(fields[3], number), *rating});
  }
  return records;
}

CsvColumnSpec CsvColumnSpec::positional(std::size_t user, std::size_t item, std::size_t timestamp) {
  CsvColumnSpec spec;
  spec.user_index = user;
  spec.item_index = item;
  spec.timestamp_index = timestamp;
  return spec;
}

CsvColumnSpec CsvColumnSpec::named(std::string user, std::string item, std::string timestamp) {
  CsvColumnSpec spec;
  spec.header = true;
  spec.user_column = std::move(user);
  spec.item_column = std::move(item);
  spec.timestamp_column = std::move(timestamp);
  return spec;
}

std::vector<InteractionRecord> parse_csv(const std::filesystem::path& path, const CsvColumnSpec& spec) {
  auto in = open_input(path);
  return parse_csv(in, spec);
}

std::vector<InteractionRecord> parse_csv(std::istream& in, const CsvColumnSpec& spec) {
  auto rows = read_delimited(in, spec.delimiter);
  std::size_t user = spec.user_index, item = spec.item_index, timestamp = spec.timestamp_index;
  std::size_t first = 0;
  if (spec.header) {
    if (rows.empty()) throw SchemaError("CSV input has no header line");
    const auto& names = rows[0].second;
    auto locate = [&](const std::string& name) {
      auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw SchemaError("CSV header lacks column '" + name + "'");
      return static_cast<std::size_t>(it - names.begin());
    };
    user = locate(spec.user_column);
    item = locate(spec.item_column);
    timestamp = locate(spec.timestamp_column);
    first = 1;
  }
  const std::size_t needed = std::max({user, item, timestamp}) + 1;
  std::vector<InteractionRecord> records;
  records.reserve(rows.size() - first);
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& [line, fields] = rows[r];
    if (fields.size() < needed) {
      throw SchemaError("line " + std::to_string(line) + ": " + std::to_string(fields.size()) +
                        " fields, column " + std::to_string(needed - 1) + " missing");
    }
    records.push_back({fields[user], fields[item], parse_timestamp(fields[timestamp], line), 1.0});
  }
  return records;
}

DatasetStats InteractionDataset::stats() const {
  DatasetStats s;
  s.num_users = num_users();
  s.num_items = num_items();
  for (const auto& seq : sequences) s.num_actions += seq.size();
  if (s.num_users > 0) s.avg_length = static_cast<double>(s.num_actions) / static_cast<double>(s.num_users);
  if (s.num_users > 0 && s.num_items > 0) {
    s.density = static_cast<double>(s.num_actions) / (static_cast<double>(s.num_users) * static_cast<double>(s.num_items));
  }
  return s;
}

std::optional<ItemId> InteractionDataset::find_item(const std::string& external) const {
  auto it = item_lookup.find(external);
  if (it == item_lookup.end()) return std::nullopt;
  return it->second;
}

void assign_popularity(InteractionDataset& dataset) {
  dataset.popularity.assign(dataset.num_items() + 1, 0);
  for (const auto& seq : dataset.sequences) {
    for (std::size_t i = 0; i + 2 < seq.size(); ++i) ++dataset.popularity[seq[i]];
  }
}

InteractionDataset build_dataset(std::span<const InteractionRecord> records, const BuildOptions& options) {
  struct Event {
    std::int64_t timestamp;
    std::size_t order;
    std::size_t item;  // raw item index
  };
  std::unordered_map<std::string, std::size_t> user_groups;
  std::unordered_map<std::string, std::size_t> raw_items;
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;
  std::vector<std::vector<Event>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    auto [uit, new_user] = user_groups.try_emplace(rec.user, groups.size());
    if (new_user) {
      groups.emplace_back();
      user_keys.push_back(rec.user);
    }
    auto [iit, new_item] = raw_items.try_emplace(rec.item, item_keys.size());
    if (new_item) item_keys.push_back(rec.item);
    groups[uit->second].push_back({rec.timestamp, i, iit->second});
  }
  for (auto& events : groups) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  }

  std::vector<bool> user_alive(groups.size(), true);
  for (;;) {
    bool changed = false;
    for (std::size_t u = 0; u < groups.size(); ++u) {
      if (user_alive[u] && groups[u].size() < options.min_user_interactions) {
        user_alive[u] = false;
        changed = true;
      }
    }
    if (options.min_item_interactions > 0) {
      std::vector<std::size_t> counts(item_keys.size(), 0);
      for (std::size_t u = 0; u < groups.size(); ++u) {
        if (!user_alive[u]) continue;
        for (const Event& e : groups[u]) ++counts[e.item];
      }
      for (std::size_t u = 0; u < groups.size(); ++u) {
        if (!user_alive[u]) continue;
        auto& events = groups[u];
        auto end = std::remove_if(events.begin(), events.end(),
                                  [&](const Event& e) { return counts[e.item] < options.min_item_interactions; });
        if (end != events.end()) {
          events.erase(end, events.end());
          changed = true;
        }
      }
    }
    if (!changed || options.min_item_interactions == 0) break;
  }

  InteractionDataset ds;
  std::vector<ItemId> item_ids(item_keys.size(), 0);
  for (std::size_t u = 0; u < groups.size(); ++u) {
    if (!user_alive[u]) continue;
    std::vector<ItemId> seq;
    seq.reserve(groups[u].size());
    for (const Event& e : groups[u]) {
      if (item_ids[e.item] == 0) {
        ds.item_names.push_back(item_keys[e.item]);
        item_ids[e.item] = ds.item_names.size();
        ds.item_lookup.emplace(item_keys[e.item], item_ids[e.item]);
      }
      seq.push_back(item_ids[e.item]);
    }
    ds.user_lookup.emplace(user_keys[u], ds.sequences.size());
    ds.user_names.push_back(user_keys[u]);
    ds.sequences.push_back(std::move(seq));
  }
  if (ds.sequences.empty()) {
    throw EmptyDatasetError("no user has at least " + std::to_string(options.min_user_interactions) +
                            " interactions after filtering");
  }
  assign_popularity(ds);
  return ds;
}

LeaveOneOutSplit leave_one_out(const InteractionDataset& dataset) {
  LeaveOneOutSplit split;
  split.users.reserve(dataset.num_users());
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto& seq = dataset.sequences[u];
    if (seq.size() < 3) {
      throw ContractError("leave_one_out: user " + std::to_string(u) + " has only " + std::to_string(seq.size()) +
                          " interactions");
    }
    UserSplit s;
    s.train.assign(seq.begin(), seq.end() - 2);
    s.validation = seq[seq.size() - 2];
    s.test = seq.back();
    split.users.push_back(std::move(s));
  }
  return split;
}

std::size_t cloze_mask_count(std::size_t length, double rho) {
  // The epsilon keeps exact products such as 0.29 * 100 from flooring to 28.
  const auto k = static_cast<std::size_t>(std::floor(rho * static_cast<double>(length) + 1e-9));
  return std::max<std::size_t>(1, k);
}

MaskedSequence cloze_mask(std::span<const ItemId> sequence, double rho, std::size_t num_items, Rng& rng) {
  return cloze_mask_exact(sequence, cloze_mask_count(sequence.size(), rho), num_items, rng);
}

MaskedSequence cloze_mask_exact(std::span<const ItemId> sequence, std::size_t count, std::size_t num_items, Rng& rng) {
  if (sequence.empty()) throw ContractError("cloze_mask: empty sequence");
  const std::size_t n = sequence.size();
  const std::size_t k = std::min(std::max<std::size_t>(count, 1), n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.uniform_index(n - i)]);
  order.resize(k);
  std::sort(order.begin(), order.end());
  MaskedSequence out;
  out.ids.assign(sequence.begin(), sequence.end());
  for (std::size_t pos : order) {
    out.label_positions.push_back(pos);
    out.labels.push_back(sequence[pos]);
    out.ids[pos] = mask_token(num_items);
  }
  return out;
}

MaskedSequence last_item_mask(std::span<const ItemId> sequence, std::size_t num_items) {
  if (sequence.empty()) throw ContractError("last_item_mask: empty sequence");
  MaskedSequence out;
  out.ids.assign(sequence.begin(), sequence.end());
  out.ids.back() = mask_token(num_items);
  out.label_positions.push_back(sequence.size() - 1);
  out.labels.push_back(sequence.back());
  return out;
}

std::size_t MaskedBatch::num_labels() const {
  std::size_t total = 0;
  for (const auto& l : labels) total += l.size();
  return total;
}

void MaskedBatch::check_invariants(std::size_t num_items) const {
  const std::size_t n = input.length;
  for (std::size_t r = 0; r < rows(); ++r) {
    if (label_positions[r].empty()) throw ContractError("MaskedBatch: row " + std::to_string(r) + " has no label");
    for (std::size_t i = 0; i < label_positions[r].size(); ++i) {
      const std::size_t pos = label_positions[r][i];
      if (pos >= n || pad_flags[r * n + pos]) {
        throw ContractError("MaskedBatch: row " + std::to_string(r) + " labels a pad position");
      }
      if (input.ids[r * n + pos] != mask_token(num_items)) {
        throw ContractError("MaskedBatch: row " + std::to_string(r) + " labels a position not holding MASK");
      }
      if (labels[r][i] == kPadToken || labels[r][i] > num_items) {
        throw ContractError("MaskedBatch: row " + std::to_string(r) + " has a non-item label");
      }
    }
  }
}

void append_instance(MaskedBatch& batch, const MaskedSequence& instance, std::size_t max_len) {
  if (batch.input.rows == 0) batch.input.length = max_len;
  const std::size_t len = instance.ids.size();
  std::vector<std::size_t> positions;
  std::vector<ItemId> labels;
  for (std::size_t i = 0; i < instance.label_positions.size(); ++i) {
    const std::size_t pos = instance.label_positions[i];
    if (len > max_len) {
      if (pos < len - max_len) continue;
      positions.push_back(pos - (len - max_len));
    } else {
      positions.push_back(pos + (max_len - len));
    }
    labels.push_back(instance.labels[i]);
  }
  if (positions.empty()) throw ContractError("append_instance: every label was truncated away");
  auto padded = pad_truncate(instance.ids, max_len);
  for (TokenId id : padded) batch.pad_flags.push_back(id == kPadToken);
  batch.input.push_row(padded);
  batch.label_positions.push_back(std::move(positions));
  batch.labels.push_back(std::move(labels));
}

std::vector<MaskedBatch> make_training_batches(const LeaveOneOutSplit& split, std::size_t num_items,
                                               const BatchOptions& options, std::uint64_t epoch_seed) {
  if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
  Rng rng(epoch_seed);
  std::vector<MaskedSequence> instances;
  instances.reserve(split.users.size() * (1 + options.last_item_instances));
  for (const UserSplit& user : split.users) {
    std::span<const ItemId> train(user.train);
    if (train.size() > options.max_len) train = train.last(options.max_len);
    if (options.masks_per_sequence > 0) {
      instances.push_back(cloze_mask_exact(train, options.masks_per_sequence, num_items, rng));
    } else {
      instances.push_back(cloze_mask(train, options.mask_proportion, num_items, rng));
    }
    for (std::size_t i = 0; i < options.last_item_instances; ++i) instances.push_back(last_item_mask(train, num_items));
  }
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<MaskedBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
    MaskedBatch batch;
    batch.input.length = options.max_len;
    const std::size_t end = std::min(order.size(), start + options.batch_size);
    for (std::size_t i = start; i < end; ++i) append_instance(batch, instances[order[i]], options.max_len);
    batches.push_back(std::move(batch));
  }
  return batches;
}

void save_dataset(const InteractionDataset& dataset, const std::filesystem::path& dataset_file,
                  const std::filesystem::path& vocab_file) {
  const DatasetStats stats = dataset.stats();
  std::ofstream out(dataset_file, std::ios::binary);
  if (!out) throw DataError("cannot write '" + dataset_file.string() + "'");
  out << "users=" << stats.num_users << " items=" << stats.num_items << " actions=" << stats.num_actions << '\n';
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    out << u << '\t';
    const auto& seq = dataset.sequences[u];
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i > 0) out << ',';
      out << seq[i];
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing '" + dataset_file.string() + "'");

  std::ofstream vocab(vocab_file, std::ios::binary);
  if (!vocab) throw DataError("cannot write '" + vocab_file.string() + "'");
  for (std::size_t u = 0; u < dataset.user_names.size(); ++u) vocab << "user\t" << u << '\t' << dataset.user_names[u] << '\n';
  for (std::size_t i = 0; i < dataset.item_names.size(); ++i) {
    vocab << "item\t" << (i + 1) << '\t' << dataset.item_names[i] << '\n';
  }
  if (!vocab) throw DataError("failed writing '" + vocab_file.string() + "'");
}

InteractionDataset load_dataset(const std::filesystem::path& dataset_file,
                                const std::optional<std::filesystem::path>& vocab_file) {
  auto in = open_input(dataset_file);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(dataset_file.string() + ": missing header line");
  strip_cr(line);
  std::size_t users = 0, items = 0, actions = 0;
  {
    unsigned long long u = 0, i = 0, a = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "users=%llu items=%llu actions=%llu%c", &u, &i, &a, &tail) != 3) {
      throw ParseError(dataset_file.string() + ": line 1: malformed header '" + line + "'");
    }
    users = u;
    items = i;
    actions = a;
  }
  InteractionDataset ds;
  std::size_t number = 1;
  std::size_t seen_actions = 0;
  while (std::getline(in, line)) {
    ++number;
    strip_cr(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    auto fail = [&](const std::string& what) {
      throw ParseError(dataset_file.string() + ": line " + std::to_string(number) + ": " + what);
    };
    if (tab == std::string::npos) fail("missing tab separator");
    auto uid = to_int64(std::string_view(line).substr(0, tab));
    if (!uid || static_cast<std::size_t>(*uid) != ds.sequences.size()) fail("user ids must be consecutive from 0");
    std::vector<ItemId> seq;
    std::string_view rest = std::string_view(line).substr(tab + 1);
    while (!rest.empty()) {
      auto comma = rest.find(',');
      auto id = to_int64(rest.substr(0, comma));
      if (!id || *id < 1 || static_cast<std::size_t>(*id) > items) fail("item id out of range 1.." + std::to_string(items));
      seq.push_back(static_cast<ItemId>(*id));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    seen_actions += seq.size();
    ds.sequences.push_back(std::move(seq));
  }
  if (ds.sequences.size() != users || seen_actions != actions) {
    throw ParseError(dataset_file.string() + ": header counts do not match the file body");
  }
  if (users == 0) throw EmptyDatasetError(dataset_file.string() + ": dataset has no users");
  ds.user_names.resize(users);
  ds.item_names.resize(items);
  for (std::size_t u = 0; u < users; ++u) ds.user_names[u] = std::to_string(u);
  for (std::size_t i = 0; i < items; ++i) ds.item_names[i] = std::to_string(i + 1);
  if (vocab_file) {
    auto vin = open_input(*vocab_file);
    std::size_t vnumber = 0;
    while (std::getline(vin, line)) {
      ++vnumber;
      strip_cr(line);
      if (line.empty()) continue;
      auto t1 = line.find('\t');
      auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) {
        throw ParseError(vocab_file->string() + ": line " + std::to_string(vnumber) + ": expected kind<TAB>id<TAB>name");
      }
      std::string kind = line.substr(0, t1);
      auto id = to_int64(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
      std::string name = line.substr(t2 + 1);
      if (kind == "user" && id && *id >= 0 && static_cast<std::size_t>(*id) < users) {
        ds.user_names[static_cast<std::size_t>(*id)] = name;
      } else if (kind == "item" && id && *id >= 1 && static_cast<std::size_t>(*id) <= items) {
        ds.item_names[static_cast<std::size_t>(*id) - 1] = name;
      } else {
        throw ParseError(vocab_file->string() + ": line " + std::to_string(vnumber) + ": bad entry '" + line + "'");
      }
    }
  }
  for (std::size_t u = 0; u < users; ++u) ds.user_lookup.emplace(ds.user_names[u], u);
  for (std::size_t i = 0; i < items; ++i) ds.item_lookup.emplace(ds.item_names[i], i + 1);
  assign_popularity(ds);
  return ds;
}

std::uint64_t file_fingerprint(const std::filesystem::path& path) {
  auto in = open_input(path);
  uLong crc = crc32(0L, Z_NULL, 0);
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const auto got = in.gcount();
    if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buffer.data()), static_cast<uInt>(got));
  }
  return static_cast<std::uint64_t>(crc);
}

std::string format_stats_table(const std::string& name, const DatasetStats& stats) {
  char row[256];
  std::snprintf(row, sizeof(row), "%-10s %10zu %10zu %12zu %12.1f %9.2f%%\n", name.c_str(), stats.num_users,
                stats.num_items, stats.num_actions, stats.avg_length, stats.density * 100.0);
  char header[256];
  std::snprintf(header, sizeof(header), "%-10s %10s %10s %12s %12s %10s\n", "Dataset", "#users", "#items", "#actions",
                "Avg. length", "Density");
  return std::string(header) + row;
}

}  // namespace bert4rec
