#include <gtest/gtest.h>

#include <bit>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "latcompass/direction_store.hpp"
#include "latcompass/error.hpp"
#include "support/temp_dir.hpp"

using namespace latcompass;
using latcompass::testing::TempDir;

namespace {

template <typename Fn>
void expect_code(ErrorCode code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << error_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

CalibratedCompass random_compass(std::mt19937_64& rng, std::size_t dim, SpaceTag tag) {
  std::normal_distribution<double> g;
  std::vector<double> v(dim);
  for (double& x : v) x = g(rng);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  return CalibratedCompass{"cmp-x", normalize(v, tag), g(rng), u(rng), TraversalStepSize(u(rng)), tag, u(rng), "ses-x", 2,
                           TrainingStats{7, 7, true}};
}

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

}  // namespace

TEST(Store, SaveDefaultsToPending) {
  TempDir dir;
  DirectionStore store(dir.path());
  std::mt19937_64 rng(1);
  const DirectionRecord r = store.save(random_compass(rng, 8, SpaceTag::z()), "fullness", 0, "fp");
  EXPECT_EQ(r.status, ModerationStatus::Pending);
  EXPECT_EQ(r.label, "fullness");
  EXPECT_EQ(r.origin_category, 0);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / (r.id + ".json")));
  EXPECT_EQ(store.get(r.id).label, "fullness");
}

TEST(Store, LabelValidation) {
  TempDir dir;
  DirectionStore store(dir.path());
  std::mt19937_64 rng(2);
  const auto c = random_compass(rng, 8, SpaceTag::z());
  expect_code(ErrorCode::EmptyLabel, [&] { store.save(c, "   \t\n", 0, "fp"); });
  expect_code(ErrorCode::EmptyLabel, [&] { store.save(c, "", 0, "fp"); });
  EXPECT_EQ(store.save(c, "  gloaming  ", 0, "fp").label, "gloaming");
  EXPECT_NO_THROW(store.save(c, std::string(200, 'a'), 0, "fp"));
  expect_code(ErrorCode::LabelTooLong, [&] { store.save(c, std::string(201, 'a'), 0, "fp"); });
  // 200 two-byte characters are 200 characters, not 400.
  std::string accented;
  for (int i = 0; i < 200; ++i) accented += "\xC3\xA9";
  EXPECT_NO_THROW(store.save(c, accented, 0, "fp"));
  EXPECT_EQ(store.list().size(), 3u);
}

TEST(Store, RoundTripIsBitwise) {
  TempDir dir;
  DirectionStore store(dir.path());
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const SpaceTag tag = i % 2 ? SpaceTag::layer(1) : SpaceTag::z();
    const CalibratedCompass c = random_compass(rng, i % 2 ? 64 : 8, tag);
    const DirectionRecord saved = store.save(c, "label " + std::to_string(i), i % 4, "fp");
    const DirectionRecord back = DirectionStore(dir.path()).get(saved.id);
    ASSERT_EQ(back.direction.size(), c.direction.size());
    for (std::size_t j = 0; j < back.direction.size(); ++j) EXPECT_EQ(bits(back.direction[j]), bits(c.direction[j]));
    EXPECT_EQ(bits(back.bias), bits(c.bias));
    EXPECT_EQ(bits(back.step_unit), bits(c.step_unit.magnitude()));
    EXPECT_EQ(bits(back.feature_scale), bits(c.feature_scale));
    EXPECT_EQ(bits(back.weight_norm), bits(c.weight_norm));
    EXPECT_EQ(back.space, tag);
    const LoadedCompass loaded = to_compass(back, "fp");
    EXPECT_FALSE(loaded.fingerprint_mismatch);
    EXPECT_EQ(loaded.compass.direction, c.direction);
    EXPECT_EQ(loaded.compass.step_unit, c.step_unit);
  }
}

TEST(Store, ListOrderingAndFilters) {
  TempDir dir;
  DirectionStore store(dir.path());
  EXPECT_TRUE(store.list().empty());
  std::mt19937_64 rng(4);
  const auto a = store.save(random_compass(rng, 8, SpaceTag::z()), "first", 0, "fp");
  const auto b = store.save(random_compass(rng, 64, SpaceTag::layer(1)), "second", 0, "fp");
  const auto all = store.list();
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].id, b.id);
  EXPECT_EQ(all[1].id, a.id);
  EXPECT_LT(a.created_at, b.created_at);
  EXPECT_TRUE(store.list(ModerationStatus::Approved).empty());
  EXPECT_EQ(store.list(std::nullopt, SpaceTag::z()).size(), 1u);
  EXPECT_EQ(store.list(std::nullopt, SpaceTag::layer(1))[0].id, b.id);
}

TEST(Store, Moderation) {
  TempDir dir;
  DirectionStore store(dir.path());
  std::mt19937_64 rng(5);
  const auto r = store.save(random_compass(rng, 8, SpaceTag::z()), "x", 0, "fp");
  EXPECT_EQ(store.set_moderation_status(r.id, ModerationStatus::Approved).status, ModerationStatus::Approved);
  EXPECT_EQ(store.list(ModerationStatus::Approved).size(), 1u);
  store.set_moderation_status(r.id, ModerationStatus::Rejected);
  EXPECT_TRUE(store.list(ModerationStatus::Approved).empty());
  EXPECT_EQ(store.get(r.id).status, ModerationStatus::Rejected);
  expect_code(ErrorCode::UnknownRecord, [&] { store.set_moderation_status("dir-unknown", ModerationStatus::Approved); });
  expect_code(ErrorCode::UnknownRecord, [&] { store.get("../etc/passwd"); });
  expect_code(ErrorCode::InvalidArgument, [] { parse_status("public"); });
}

TEST(Store, SeesEditsFromAnotherHandle) {
  TempDir dir;
  DirectionStore a(dir.path());
  DirectionStore b(dir.path());
  std::mt19937_64 rng(6);
  const auto r = a.save(random_compass(rng, 8, SpaceTag::z()), "x", 0, "fp");
  b.set_moderation_status(r.id, ModerationStatus::Approved);
  EXPECT_EQ(a.list(ModerationStatus::Approved).size(), 1u);
}

TEST(Store, IgnoresTemporaryAndForeignFiles) {
  TempDir dir;
  DirectionStore store(dir.path());
  std::mt19937_64 rng(7);
  store.save(random_compass(rng, 8, SpaceTag::z()), "x", 0, "fp");
  std::ofstream(dir.path() / ".dir-abc.json.tmp-1") << "{partial";
  std::ofstream(dir.path() / "notes.txt") << "hello";
  std::ofstream(dir.path() / "broken.json") << "{not json";
  EXPECT_EQ(store.list().size(), 1u);
}

TEST(Store, NoTemporaryFilesRemainAfterWrites) {
  TempDir dir;
  DirectionStore store(dir.path());
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) {
    const auto r = store.save(random_compass(rng, 8, SpaceTag::z()), "x", 0, "fp");
    store.set_moderation_status(r.id, ModerationStatus::Approved);
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
    EXPECT_NE(entry.path().filename().string().front(), '.');
  }
}

TEST(Store, ExportImport) {
  TempDir dir;
  TempDir other;
  DirectionStore store(dir.path());
  std::mt19937_64 rng(9);
  const auto r = store.save(random_compass(rng, 8, SpaceTag::z()), "dusk", 1, "fp");
  store.set_moderation_status(r.id, ModerationStatus::Approved);
  const auto file = other.path() / "dusk.json";
  store.export_record(r.id, file);

  DirectionStore second(other.path() / "store");
  const auto imported = second.import_record(file);
  EXPECT_NE(imported.id, r.id);
  EXPECT_EQ(imported.status, ModerationStatus::Pending);
  EXPECT_EQ(imported.label, "dusk");
  EXPECT_EQ(imported.direction, store.get(r.id).direction);
  expect_code(ErrorCode::UnknownRecord, [&] { store.export_record("dir-nope", file); });

  std::ofstream(other.path() / "bad.json") << "[1,2,3]";
  expect_code(ErrorCode::InvalidArgument, [&] { second.import_record(other.path() / "bad.json"); });
  expect_code(ErrorCode::StorageFailure, [&] { second.import_record(other.path() / "missing.json"); });

  json doc = record_to_json(store.get(r.id));
  doc["direction"] = {0.5, 0.5};
  std::ofstream(other.path() / "notunit.json") << doc.dump();
  expect_code(ErrorCode::InvalidArgument, [&] { second.import_record(other.path() / "notunit.json"); });
}

TEST(Store, FingerprintMismatchIsFlagged) {
  std::mt19937_64 rng(10);
  DirectionRecord r;
  const auto c = random_compass(rng, 8, SpaceTag::z());
  r.id = "dir-1";
  r.label = "x";
  r.direction.assign(c.direction.values().begin(), c.direction.values().end());
  r.step_unit = 0.3;
  r.generator_fingerprint = "fnv1a64:0000000000000001";
  EXPECT_TRUE(to_compass(r, "fnv1a64:0000000000000002").fingerprint_mismatch);
  EXPECT_FALSE(to_compass(r, "fnv1a64:0000000000000001").fingerprint_mismatch);
  r.direction[0] += 0.01;
  expect_code(ErrorCode::InvalidArgument, [&] { to_compass(r, ""); });
}

TEST(Store, MissingWeightNormReadsAsOne) {
  std::mt19937_64 rng(11);
  TempDir dir;
  DirectionStore store(dir.path());
  auto doc = record_to_json(store.save(random_compass(rng, 8, SpaceTag::z()), "x", 0, "fp"));
  doc.erase("weight_norm");
  EXPECT_EQ(record_from_json(doc).weight_norm, 1.0);
}

TEST(Store, ConcurrentSavesGetDistinctIdsAndTimestamps) {
  TempDir dir;
  DirectionStore store(dir.path());
  std::vector<std::thread> th;
  std::mutex mu;
  std::set<std::string> ids, stamps;
  for (int t = 0; t < 4; ++t) {
    th.emplace_back([&, t] {
      std::mt19937_64 rng(static_cast<std::uint64_t>(t));
      for (int i = 0; i < 10; ++i) {
        const auto r = store.save(random_compass(rng, 8, SpaceTag::z()), "x", 0, "fp");
        std::lock_guard lock(mu);
        ids.insert(r.id);
        stamps.insert(r.created_at);
      }
    });
  }
  for (auto& x : th) x.join();
  EXPECT_EQ(ids.size(), 40u);
  EXPECT_EQ(stamps.size(), 40u);
  EXPECT_EQ(store.list().size(), 40u);
}

TEST(Store, UnusableDirectoryIsStorageFailure) {
  TempDir dir;
  std::ofstream(dir.path() / "plain-file") << "x";
  expect_code(ErrorCode::StorageFailure, [&] { DirectionStore s(dir.path() / "plain-file" / "sub"); });
}
