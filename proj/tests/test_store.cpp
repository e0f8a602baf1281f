#include <gtest/gtest.h>

#include <thread>

#include "envlabel/record.hpp"
#include "envlabel/store.hpp"
#include "support/fixtures.hpp"

using namespace envlabel;
using namespace std::chrono_literals;
using envlabel::testing::read_text;
using envlabel::testing::TempDir;
using envlabel::testing::write_text;

namespace {

FrameAnnotation make(const std::string& id, Daytime d, long long ms) {
  FrameAnnotation a;
  a.frame_id = id;
  a.label.daytime = d;
  a.provenance[Category::Daytime] = Source::Human;
  a.updated_at = Timestamp(std::chrono::milliseconds(ms));
  return a;
}

std::size_t line_count(const std::filesystem::path& p) {
  const auto text = read_text(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

AnnotationStore::Options fast() {
  AnnotationStore::Options o;
  o.fsync = false;
  return o;
}

}  // namespace

TEST(Store, InMemoryPutGet) {
  AnnotationStore store;
  EXPECT_EQ(store.size(), 0u);
  EXPECT_FALSE(store.get("a").has_value());
  store.put(make("b", Daytime::Day, 10));
  store.put(make("a", Daytime::Night, 10));
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.get("a")->label.daytime, Daytime::Night);
  const auto all = store.all();
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].frame_id, "a");
  EXPECT_EQ(all[1].frame_id, "b");
}

TEST(Store, LastWriteWinsByTimestamp) {
  AnnotationStore store;
  store.put(make("a", Daytime::Day, 100));
  const auto live = store.put(make("a", Daytime::Night, 50));  // older: ignored
  EXPECT_EQ(live.label.daytime, Daytime::Day);
  EXPECT_EQ(store.get("a")->label.daytime, Daytime::Day);
  store.put(make("a", Daytime::Twilight, 100));  // tie: later write wins
  EXPECT_EQ(store.get("a")->label.daytime, Daytime::Twilight);
  store.put(make("a", Daytime::Night, 101));
  EXPECT_EQ(store.get("a")->label.daytime, Daytime::Night);
}

TEST(Store, PutLatestAlwaysWins) {
  AnnotationStore store;
  store.put(make("a", Daytime::Day, 1000));
  const auto live = store.put_latest(make("a", Daytime::Night, 10));
  EXPECT_EQ(live.label.daytime, Daytime::Night);
  EXPECT_EQ(live.updated_at, Timestamp(1001ms));
  const auto later = store.put_latest(make("a", Daytime::Twilight, 5000));
  EXPECT_EQ(later.updated_at, Timestamp(5000ms));
  const auto fresh = store.put_latest(make("b", Daytime::Day, 7));
  EXPECT_EQ(fresh.updated_at, Timestamp(7ms));
}

TEST(Store, RejectsInvalid) {
  AnnotationStore store;
  auto a = make("a", Daytime::Day, 1);
  a.provenance[Category::Fog] = Source::Human;  // no fog value
  EXPECT_THROW(store.put(a), std::invalid_argument);
  EXPECT_EQ(store.size(), 0u);
}

TEST(Store, PersistsAcrossReopen) {
  TempDir dir;
  const auto path = dir / "labels.jsonl";
  {
    AnnotationStore store(path, fast());
    store.put(make("a", Daytime::Day, 1));
    store.put(make("b", Daytime::Night, 2));
    store.put(make("a", Daytime::Twilight, 3));
  }
  EXPECT_EQ(line_count(path), 3u);
  AnnotationStore store(path, fast());
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.get("a")->label.daytime, Daytime::Twilight);
  EXPECT_TRUE(store.load_issues().empty());
}

TEST(Store, LoadPrefersLaterTimestampRegardlessOfLineOrder) {
  TempDir dir;
  const auto path = dir / "labels.jsonl";
  write_text(path, serialize(make("a", Daytime::Night, 200)) + "\n" + serialize(make("a", Daytime::Day, 100)) +
                       "\n" + serialize(make("b", Daytime::Day, 5)) + "\n" +
                       serialize(make("b", Daytime::Twilight, 5)) + "\n");
  AnnotationStore store(path, fast());
  EXPECT_EQ(store.get("a")->label.daytime, Daytime::Night);
  EXPECT_EQ(store.get("b")->label.daytime, Daytime::Twilight);  // tie: later line
}

TEST(Store, TornFinalLineIsIgnoredAndTruncated) {
  TempDir dir;
  const auto path = dir / "labels.jsonl";
  const std::string a = serialize(make("a", Daytime::Day, 1));
  const std::string b = serialize(make("b", Daytime::Night, 2));
  const std::string c = serialize(make("c", Daytime::Night, 3));
  // Every proper prefix of the third record simulates a crash mid-write.
  for (std::size_t cut = 1; cut < c.size(); cut += 7) {
    write_text(path, a + "\n" + b + "\n" + c.substr(0, cut));
    {
      AnnotationStore ro(path, {.read_only = true, .fsync = false});
      EXPECT_EQ(ro.size(), 2u);
      ASSERT_EQ(ro.load_issues().size(), 1u);
      EXPECT_EQ(ro.load_issues()[0].line, 3u);
    }
    {
      AnnotationStore store(path, fast());
      ASSERT_EQ(store.size(), 2u);
      store.put(make("d", Daytime::Day, 4));
    }
    AnnotationStore reopened(path, fast());
    EXPECT_EQ(reopened.size(), 3u) << cut;
    EXPECT_TRUE(reopened.load_issues().empty());
    EXPECT_EQ(reopened.get("d")->label.daytime, Daytime::Day);
  }
}

TEST(Store, CorruptMiddleLineIsReportedNotFatal) {
  TempDir dir;
  const auto path = dir / "labels.jsonl";
  write_text(path, serialize(make("a", Daytime::Day, 1)) + "\n{\"frame_id\":\"zz\",\"daytime\":\"Dusk\"}\n" +
                       serialize(make("b", Daytime::Day, 1)) + "\n\n");
  AnnotationStore store(path, fast());
  EXPECT_EQ(store.size(), 2u);
  ASSERT_EQ(store.load_issues().size(), 1u);
  EXPECT_EQ(store.load_issues()[0].line, 2u);
  EXPECT_EQ(store.load_issues()[0].frame_id, "zz");
}

TEST(Store, CompactKeepsOneLinePerFrame) {
  TempDir dir;
  const auto path = dir / "labels.jsonl";
  AnnotationStore store(path, fast());
  for (int i = 0; i < 20; ++i) store.put(make(i % 2 ? "a" : "b", Daytime::Day, i));
  EXPECT_EQ(line_count(path), 20u);
  store.compact();
  EXPECT_EQ(line_count(path), 2u);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  store.put(make("c", Daytime::Night, 100));
  EXPECT_EQ(line_count(path), 3u);
  AnnotationStore reopened(path, fast());
  EXPECT_EQ(reopened.all(), store.all());
}

TEST(Store, AutomaticCompaction) {
  TempDir dir;
  const auto path = dir / "labels.jsonl";
  AnnotationStore store(path, {.read_only = false, .fsync = false, .compact_after = 5});
  for (int i = 0; i < 5; ++i) store.put(make("a", Daytime::Day, i));
  EXPECT_EQ(line_count(path), 5u);
  store.put(make("a", Daytime::Night, 10));  // fifth superseded line
  EXPECT_EQ(line_count(path), 1u);
}

TEST(Store, ReadOnly) {
  TempDir dir;
  const auto path = dir / "labels.jsonl";
  EXPECT_THROW(AnnotationStore(path, {.read_only = true}), std::runtime_error);
  { AnnotationStore(path, fast()).put(make("a", Daytime::Day, 1)); }
  AnnotationStore ro(path, {.read_only = true});
  EXPECT_EQ(ro.size(), 1u);
  EXPECT_THROW(ro.put(make("b", Daytime::Day, 1)), std::logic_error);
  EXPECT_EQ(line_count(path), 1u);
}

TEST(Store, ConcurrentWritersAndReaders) {
  TempDir dir;
  const auto path = dir / "labels.jsonl";
  AnnotationStore store(path, {.read_only = false, .fsync = false, .compact_after = 64});
  constexpr int kThreads = 8;
  constexpr int kPuts = 200;
  std::atomic<bool> stop{false};
  std::thread reader([&] {
    while (!stop) {
      for (const auto& a : store.all()) ASSERT_TRUE(validate(a, ValidationMode::Draft).empty());
    }
  });
  std::vector<std::thread> writers;
  for (int t = 0; t < kThreads; ++t) {
    writers.emplace_back([&, t] {
      for (int i = 0; i < kPuts; ++i) {
        store.put(make("shared", t % 2 ? Daytime::Day : Daytime::Night, t * kPuts + i));
        store.put(make("own" + std::to_string(t), Daytime::Twilight, i));
      }
    });
  }
  for (auto& w : writers) w.join();
  stop = true;
  reader.join();

  EXPECT_EQ(store.size(), kThreads + 1u);
  // The highest timestamp ever written to "shared" is live.
  EXPECT_EQ(store.get("shared")->updated_at, Timestamp(std::chrono::milliseconds(kThreads * kPuts - 1)));
  AnnotationStore reopened(path, fast());
  EXPECT_TRUE(reopened.load_issues().empty());
  EXPECT_EQ(reopened.all(), store.all());
}
