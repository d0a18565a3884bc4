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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "bert4rec/data.hpp"
#include "bert4rec/errors.hpp"

namespace bert4rec {
namespace {

std::vector<InteractionRecord> ml(const std::string& text) {
  std::istringstream in(text);
  return parse_movielens(in);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("bert4rec_data_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(ParseMovielens, ReadsFields) {
  auto recs = ml("1::1193::5::978300760\r\n1::661::3::978302109\n\n2::1357::4::978298709\n");
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].user, "1");
  EXPECT_EQ(recs[0].item, "1193");
  EXPECT_EQ(recs[0].timestamp, 978300760);
  EXPECT_EQ(recs[0].weight, 5.0);
  EXPECT_EQ(recs[2].user, "2");
}

TEST(ParseMovielens, MalformedLineNamesLineNumber) {
  try {
    ml("1::2::3::4\n1::2::3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(ml("1::2::5::-7\n"), ParseError);
  EXPECT_THROW(ml("1::2::5::soon\n"), ParseError);
}

TEST(ParseMovielens, MissingFileIsDataError) {
  EXPECT_THROW(parse_movielens(std::filesystem::path("/nonexistent/ratings.dat")), DataError);
}

TEST(ParseCsv, HeaderColumnsAndQuoting) {
  std::istringstream in("ts,item,who\n5,\"a,b\",u1\n3,\"say \"\"hi\"\"\",u1\n");
  auto recs = parse_csv(in, CsvColumnSpec::named("who", "item", "ts"));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].item, "a,b");
  EXPECT_EQ(recs[1].item, "say \"hi\"");
  EXPECT_EQ(recs[1].timestamp, 3);
  EXPECT_EQ(recs[0].user, "u1");
}

TEST(ParseCsv, PositionalAndErrors) {
  std::istringstream ok("u;i;7\n");
  auto spec = CsvColumnSpec::positional(0, 1, 2);
  spec.delimiter = ';';
  EXPECT_EQ(parse_csv(ok, spec).at(0).timestamp, 7);

  std::istringstream missing_col("a,b,c\n1,2,3\n");
  EXPECT_THROW(parse_csv(missing_col, CsvColumnSpec::named("user", "b", "c")), SchemaError);
  std::istringstream short_row("1,2\n");
  EXPECT_THROW(parse_csv(short_row, CsvColumnSpec::positional(0, 1, 2)), SchemaError);
  std::istringstream bad_ts("1,2,x\n");
  EXPECT_THROW(parse_csv(bad_ts, CsvColumnSpec::positional(0, 1, 2)), ParseError);
}

TEST(BuildDataset, SortsChronologicallyAndStably) {
  std::vector<InteractionRecord> recs = {
      {"u", "c", 30}, {"u", "a", 10}, {"u", "b", 20}, {"u", "d", 20}, {"u", "e", 40},
  };
  auto ds = build_dataset(recs, {.min_user_interactions = 1});
  ASSERT_EQ(ds.num_users(), 1u);
  std::vector<std::string> order;
  for (ItemId id : ds.sequences[0]) order.push_back(ds.item_names[id - 1]);
  EXPECT_EQ(order, (std::vector<std::string>{"a", "b", "d", "c", "e"}));
  // ids are assigned in order of first appearance in the sorted sequences
  EXPECT_EQ(ds.sequences[0], (std::vector<ItemId>{1, 2, 3, 4, 5}));
}

TEST(BuildDataset, UserAndItemFiltersReachFixpoint) {
  std::vector<InteractionRecord> recs;
  // u1..u3 share items x,y,z; u4 uses rare items only.
  for (const char* u : {"u1", "u2", "u3"}) {
    int t = 0;
    for (const char* i : {"x", "y", "z"}) recs.push_back({u, i, t++});
  }
  recs.push_back({"u4", "x", 0});
  recs.push_back({"u4", "r1", 1});
  recs.push_back({"u4", "r2", 2});
  auto ds = build_dataset(recs, {.min_user_interactions = 3, .min_item_interactions = 2});
  // r1/r2 drop, then u4 falls below 3 actions and drops too
  EXPECT_EQ(ds.num_users(), 3u);
  EXPECT_EQ(ds.num_items(), 3u);
  for (const auto& seq : ds.sequences) {
    for (ItemId id : seq) {
      EXPECT_GE(id, 1u);
      EXPECT_LE(id, ds.num_items());
    }
  }
  EXPECT_THROW(build_dataset(recs, {.min_user_interactions = 10}), EmptyDatasetError);
}

TEST(BuildDataset, StatsAndPopularity) {
  std::vector<InteractionRecord> recs;
  for (int t = 0; t < 5; ++t) recs.push_back({"a", std::to_string(t), t});
  for (int t = 0; t < 5; ++t) recs.push_back({"b", std::to_string(t % 2), t});
  auto ds = build_dataset(recs, {});
  auto s = ds.stats();
  EXPECT_EQ(s.num_users, 2u);
  EXPECT_EQ(s.num_items, 5u);
  EXPECT_EQ(s.num_actions, 10u);
  EXPECT_DOUBLE_EQ(s.avg_length, 5.0);
  EXPECT_DOUBLE_EQ(s.density, 1.0);
  // training prefixes: a -> items 1,2,3; b -> items 1,2,1
  EXPECT_EQ(ds.popularity, (std::vector<std::size_t>{0, 3, 2, 1, 0, 0}));
}

TEST(LeaveOneOut, HoldsOutLastTwo) {
  InteractionDataset ds;
  ds.sequences = {{1, 2, 3, 4, 5}, {5, 4, 3}};
  auto split = leave_one_out(ds);
  EXPECT_EQ(split.users[0].train, (std::vector<ItemId>{1, 2, 3}));
  EXPECT_EQ(split.users[0].validation, 4u);
  EXPECT_EQ(split.users[0].test, 5u);
  EXPECT_EQ(split.users[1].train, (std::vector<ItemId>{5}));
  ds.sequences.push_back({1, 2});
  EXPECT_THROW(leave_one_out(ds), ContractError);
}

TEST(Tokens, PadTruncateKeepsMostRecent) {
  const std::vector<TokenId> ids = {7, 8, 9};
  EXPECT_EQ(pad_truncate(ids, 5), (std::vector<TokenId>{0, 0, 7, 8, 9}));
  EXPECT_EQ(pad_truncate(ids, 2), (std::vector<TokenId>{8, 9}));
}

TEST(Cloze, MaskCount) {
  EXPECT_EQ(cloze_mask_count(10, 0.2), 2u);
  EXPECT_EQ(cloze_mask_count(3, 0.2), 1u);  // at least one
  EXPECT_EQ(cloze_mask_count(100, 0.29), 29u);
  EXPECT_EQ(cloze_mask_count(163, 0.6), 97u);
}

TEST(Cloze, MaskedPositionsHoldMaskAndLabels) {
  Rng rng(5);
  const std::vector<ItemId> seq = {3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
  for (int trial = 0; trial < 200; ++trial) {
    auto m = cloze_mask(seq, 0.3, 9, rng);
    ASSERT_EQ(m.label_positions.size(), 3u);
    EXPECT_TRUE(std::is_sorted(m.label_positions.begin(), m.label_positions.end()));
    std::set<std::size_t> distinct(m.label_positions.begin(), m.label_positions.end());
    EXPECT_EQ(distinct.size(), 3u);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const bool masked = distinct.count(i) > 0;
      EXPECT_EQ(m.ids[i], masked ? mask_token(9) : seq[i]);
    }
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.labels[j], seq[m.label_positions[j]]);
  }
}

TEST(Cloze, EnumeratesAllSubsetsUniformly) {
  Rng rng(6);
  const std::vector<ItemId> seq = {1, 2, 3, 4, 5};
  std::map<std::vector<std::size_t>, int> seen;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) ++seen[cloze_mask_exact(seq, 2, 5, rng).label_positions];
  EXPECT_EQ(seen.size(), 10u);
  for (const auto& [subset, count] : seen) EXPECT_NEAR(count / double(trials), 0.1, 0.015);
}

TEST(Cloze, LastItemMask) {
  const std::vector<ItemId> seq = {4, 5, 6};
  auto m = last_item_mask(seq, 6);
  EXPECT_EQ(m.ids, (std::vector<TokenId>{4, 5, 7}));
  EXPECT_EQ(m.label_positions, (std::vector<std::size_t>{2}));
  EXPECT_EQ(m.labels, (std::vector<ItemId>{6}));
}

TEST(Batches, AppendInstanceShiftsAndDropsTruncatedLabels) {
  MaskedBatch batch;
  MaskedSequence inst{{1, 7, 3}, {1}, {2}};
  append_instance(batch, inst, 5);
  EXPECT_EQ(batch.input.ids, (std::vector<TokenId>{0, 0, 1, 7, 3}));
  EXPECT_EQ(batch.label_positions[0], (std::vector<std::size_t>{3}));
  MaskedSequence longer{{7, 2, 7, 4}, {0, 2}, {1, 3}};
  append_instance(batch, longer, 3);
  EXPECT_EQ(batch.label_positions[1], (std::vector<std::size_t>{1}));
  EXPECT_EQ(batch.labels[1], (std::vector<ItemId>{3}));
  MaskedSequence lost{{7, 2, 3, 4}, {0}, {1}};
  EXPECT_THROW(append_instance(batch, lost, 3), ContractError);
}

TEST(Batches, TrainingBatchesAreValidAndDeterministic) {
  InteractionDataset ds;
  Rng rng(7);
  for (int u = 0; u < 37; ++u) {
    std::vector<ItemId> seq;
    const std::size_t len = 3 + rng.uniform_index(30);
    for (std::size_t i = 0; i < len; ++i) seq.push_back(1 + rng.uniform_index(20));
    ds.sequences.push_back(seq);
  }
  auto split = leave_one_out(ds);
  BatchOptions opts{.max_len = 10, .mask_proportion = 0.2, .masks_per_sequence = 0, .last_item_instances = 1,
                    .batch_size = 16};
  auto a = make_training_batches(split, 20, opts, 11);
  auto b = make_training_batches(split, 20, opts, 11);
  auto c = make_training_batches(split, 20, opts, 12);
  std::size_t rows = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i].check_invariants(20);
    EXPECT_EQ(a[i].input.ids, b[i].input.ids);
    EXPECT_EQ(a[i].labels, b[i].labels);
    EXPECT_LE(a[i].rows(), 16u);
    rows += a[i].rows();
  }
  EXPECT_EQ(rows, 2 * 37u);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].input.ids != c[i].input.ids;
  EXPECT_TRUE(differs);
}

TEST(Batches, InvariantViolationsAreCaught) {
  MaskedBatch batch;
  append_instance(batch, MaskedSequence{{1, 4, 3}, {1}, {2}}, 4);
  batch.check_invariants(3);
  batch.input.ids[2] = 2;  // labeled slot no longer holds MASK
  EXPECT_THROW(batch.check_invariants(3), ContractError);
}

TEST(DatasetFiles, RoundTripAndDeterministicBytes) {
  std::vector<InteractionRecord> recs;
  for (int u = 0; u < 4; ++u) {
    for (int t = 0; t < 6; ++t) recs.push_back({"user" + std::to_string(u), "it" + std::to_string((u + t) % 7), t});
  }
  auto ds = build_dataset(recs, {});
  auto dir = scratch_dir("roundtrip");
  save_dataset(ds, dir / "d1.txt", dir / "v1.tsv");
  save_dataset(ds, dir / "d2.txt", dir / "v2.tsv");
  EXPECT_EQ(slurp(dir / "d1.txt"), slurp(dir / "d2.txt"));
  EXPECT_EQ(slurp(dir / "v1.tsv"), slurp(dir / "v2.tsv"));
  EXPECT_EQ(file_fingerprint(dir / "d1.txt"), file_fingerprint(dir / "d2.txt"));

  auto back = load_dataset(dir / "d1.txt", dir / "v1.tsv");
  EXPECT_EQ(back.sequences, ds.sequences);
  EXPECT_EQ(back.item_names, ds.item_names);
  EXPECT_EQ(back.user_names, ds.user_names);
  EXPECT_EQ(back.popularity, ds.popularity);
  EXPECT_EQ(back.find_item("it3"), ds.find_item("it3"));

  auto bare = load_dataset(dir / "d1.txt");
  EXPECT_EQ(bare.sequences, ds.sequences);
  EXPECT_EQ(bare.num_items(), ds.num_items());
}

TEST(DatasetFiles, CorruptFilesAreRejected) {
  auto dir = scratch_dir("corrupt");
  {
    std::ofstream out(dir / "bad.txt");
    out << "users=1 items=2 actions=2\n0\t1,9\n";
  }
  EXPECT_THROW(load_dataset(dir / "bad.txt"), DataError);
  {
    std::ofstream out(dir / "bad2.txt");
    out << "users=2 items=2 actions=2\n0\t1,2\n";
  }
  EXPECT_THROW(load_dataset(dir / "bad2.txt"), DataError);
}

TEST(StatsTable, HasTableOneColumns) {
  DatasetStats s{6040, 3416, 999611, 165.5, 0.0484};
  const std::string table = format_stats_table("ML-1m", s);
  for (const char* col : {"#users", "#items", "#actions", "Avg. length", "Density", "ML-1m", "6040", "3416", "999611",
                          "165.5", "4.84%"}) {
    EXPECT_NE(table.find(col), std::string::npos) << col;
  }
}

}  // namespace
}  // namespace bert4rec
