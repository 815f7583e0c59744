#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "fixtures/published.hpp"
#include "judgeblender/corpus_io.hpp"
#include "judgeblender/error.hpp"
#include "oracles/oracles.hpp"

namespace jb = judgeblender;
namespace c = judgeblender::corpus;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("jb_corpus_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(RelevanceLabel, Range) {
  EXPECT_EQ(c::RelevanceLabel(0).value(), 0);
  EXPECT_EQ(c::RelevanceLabel(3).value(), 3);
  EXPECT_THROW(c::RelevanceLabel(4), jb::DataError);
  EXPECT_THROW(c::RelevanceLabel(-1), jb::DataError);
}

TEST(Qrels, ParsesAndWrites) {
  const auto q = c::parse_qrels("q1 0 d1 3\nq1 0 d2 0\r\n\nq2 0 d1 1\n");
  EXPECT_EQ(q.size(), 3u);
  EXPECT_EQ(q.find("q1", "d1")->value(), 3);
  EXPECT_FALSE(q.find("q2", "d2").has_value());
  EXPECT_EQ(c::write_qrels(q), "q1 0 d1 3\nq1 0 d2 0\nq2 0 d1 1\n");
  EXPECT_EQ(q.query_ids(), (std::vector<std::string>{"q1", "q2"}));
  EXPECT_EQ(q.labels_for("q1"), (std::map<std::string, int>{{"d1", 3}, {"d2", 0}}));
}

TEST(Qrels, ErrorsCarryLineNumbers) {
  try {
    c::parse_qrels("q1 0 d1 3\nq1 0 d2 7\n", {.source_name = "gold.txt"});
    FAIL() << "expected ParseError";
  } catch (const jb::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.source(), "gold.txt");
    EXPECT_NE(std::string(e.what()).find("outside 0-3"), std::string::npos);
  }
  EXPECT_THROW(c::parse_qrels("q1 0 d1\n"), jb::ParseError);
  EXPECT_THROW(c::parse_qrels("q1 0 d1 x\n"), jb::ParseError);
  EXPECT_THROW(c::parse_qrels("q1 0 d1 1\nq1 0 d1 2\n"), jb::ParseError);
  EXPECT_THROW(c::parse_qrels("q1 0 d\xff 1\n"), jb::ParseError);
}

TEST(Qrels, LenientSkipsAndClampReports) {
  c::ParseDiagnostics diag;
  const auto q = c::parse_qrels("q1 0 d1 3\nbroken\nq1 0 d2 9\n", {.lenient = true}, &diag);
  EXPECT_EQ(q.size(), 1u);
  ASSERT_EQ(diag.skipped.size(), 2u);
  EXPECT_EQ(diag.skipped[0].rfind("line 2:", 0), 0u);
  const auto clamped = c::parse_qrels("q1 0 d1 9\nq1 0 d2 -1\n", {.clamp_labels = true});
  EXPECT_EQ(clamped.find("q1", "d1")->value(), 3);
  EXPECT_EQ(clamped.find("q1", "d2")->value(), 0);
}

TEST(Qrels, RandomRoundTrip) {
  oracle::Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    c::QrelsSet q;
    const int n = rng.uniform(1, 40);
    for (int i = 0; i < n; ++i) {
      q.insert_or_assign("q" + std::to_string(rng.uniform(0, 5)), "doc-" + std::to_string(rng.uniform(0, 30)),
                         c::RelevanceLabel(rng.uniform(0, 3)));
    }
    EXPECT_EQ(c::parse_qrels(c::write_qrels(q)), q);
  }
}

TEST(Qrels, InsertRejectsDuplicate) {
  c::QrelsSet q;
  q.insert("q", "d", c::RelevanceLabel(1));
  EXPECT_THROW(q.insert("q", "d", c::RelevanceLabel(2)), jb::DataError);
  q.insert_or_assign("q", "d", c::RelevanceLabel(2));
  EXPECT_EQ(q.find("q", "d")->value(), 2);
}

TEST(Run, OrderedByScoreThenDocId) {
  const auto r = c::parse_run(
      "q1 Q0 b 1 2.5 sys\n"
      "q1 Q0 a 2 2.5 sys\n"
      "q1 Q0 c 3 9 sys\n"
      "q2 Q0 z 1 -1e-3 sys\n");
  EXPECT_EQ(r.run_tag(), "sys");
  EXPECT_EQ(r.doc_ids("q1"), (std::vector<std::string>{"c", "a", "b"}));
  EXPECT_TRUE(r.ranking("q9").empty());
  EXPECT_EQ(c::write_run(r), "q1 Q0 c 1 9 sys\nq1 Q0 a 2 2.5 sys\nq1 Q0 b 3 2.5 sys\nq2 Q0 z 1 -0.001 sys\n");
}

TEST(Run, RoundTripIsStable) {
  oracle::Rng rng(9);
  c::RunRanking run("r");
  for (int i = 0; i < 60; ++i) {
    run.add("q" + std::to_string(i % 4), "d" + std::to_string(i), rng.unit() * 10 - 5);
  }
  const auto text = c::write_run(run);
  const auto again = c::parse_run(text);
  EXPECT_EQ(again, run);
  EXPECT_EQ(c::write_run(again), text);
}

TEST(Run, Errors) {
  EXPECT_THROW(c::parse_run("q1 Q0 a 1 1.0\n"), jb::ParseError);
  EXPECT_THROW(c::parse_run("q1 Q0 a one 1.0 s\n"), jb::ParseError);
  EXPECT_THROW(c::parse_run("q1 Q0 a 1 nan s\n"), jb::ParseError);
  EXPECT_THROW(c::parse_run("q1 Q0 a 1 1 s\nq1 Q0 b 2 0 t\n"), jb::ParseError);
  EXPECT_THROW(c::parse_run("q1 Q0 a 1 1 s\nq1 Q0 a 2 0 s\n"), jb::ParseError);
}

TEST(Text, QueriesAndPassages) {
  const auto qs = c::parse_queries("q1\twhat is a\ttab\nq2\tsecond\n");
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[0].text, "what is a\ttab");
  EXPECT_EQ(c::write_queries(qs), "q1\twhat is a\ttab\nq2\tsecond\n");
  const auto ps = c::parse_passages("d1\tcaf\xc3\xa9 text\n");
  EXPECT_EQ(ps[0].text, "caf\xc3\xa9 text");
  EXPECT_THROW(c::parse_queries("q1 no tab\n"), jb::ParseError);
  EXPECT_THROW(c::parse_queries("q1\ta\nq1\tb\n"), jb::ParseError);
  EXPECT_THROW(c::parse_passages("d1\t\n"), jb::ParseError);
  EXPECT_THROW(c::parse_passages("d1\t\xc0\xaf\n"), jb::ParseError);
}

TEST(Utf8, Validation) {
  EXPECT_TRUE(c::is_valid_utf8("plain"));
  EXPECT_TRUE(c::is_valid_utf8("\xe2\x82\xac \xf0\x9f\x98\x80"));
  EXPECT_FALSE(c::is_valid_utf8("\xe2\x82"));
  EXPECT_FALSE(c::is_valid_utf8("\xed\xa0\x80"));
  EXPECT_FALSE(c::is_valid_utf8("\xf4\x90\x80\x80"));
}

TEST(Stats, TestSplitShape) {
  // A synthetic qrels with the published test-split counts: 25 queries,
  // 4414 distinct passages, 4423 judgments.
  c::QrelsSet q;
  std::size_t i = 0;
  for (int label = 0; label < 4; ++label) {
    for (std::int64_t k = 0; k < fixtures::kTestHistogram[label]; ++k, ++i) {
      const std::string doc = "p" + std::to_string(i < 4414 ? i : i - 4414);
      q.insert("q" + std::to_string(i % 25), doc, c::RelevanceLabel(label));
    }
  }
  const auto s = c::dataset_stats(q, {}, {});
  EXPECT_EQ(s.n_queries, 25u);
  EXPECT_EQ(s.n_passages, 4414u);
  EXPECT_EQ(s.n_qrels, 4423u);
  EXPECT_EQ(s.label_histogram, (std::array<std::size_t, 4>{2005, 1233, 808, 377}));
}

TEST(Stats, PrefersSuppliedCollections) {
  const auto q = c::parse_qrels("q1 0 d1 1\n");
  const auto s = c::dataset_stats(q, {{"q1", "a"}, {"q2", "b"}}, {{"d1", "x"}, {"d2", "y"}, {"d3", "z"}});
  EXPECT_EQ(s.n_queries, 2u);
  EXPECT_EQ(s.n_passages, 3u);
}

TEST(Files, LoadRunDirSortedAndUniqueTags) {
  const auto dir = scratch_dir("runs");
  c::write_file((dir / "b.run").string(), "q1 Q0 d 1 1 beta\n");
  c::write_file((dir / "a.run").string(), "q1 Q0 d 1 1 alpha\n");
  const auto runs = c::load_run_dir(dir.string());
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[0].run_tag(), "alpha");
  c::write_file((dir / "c.run").string(), "q1 Q0 d 1 1 alpha\n");
  EXPECT_THROW(c::load_run_dir(dir.string()), jb::DataError);
  EXPECT_THROW(c::load_run_dir((dir / "missing").string()), jb::IoError);
  EXPECT_THROW(c::load_qrels((dir / "missing.txt").string()), jb::IoError);
}

TEST(Files, ParseErrorNamesFile) {
  const auto dir = scratch_dir("names");
  const auto path = (dir / "bad.qrels").string();
  c::write_file(path, "q1 0 d1 1\nq1 0 d2\n");
  try {
    c::load_qrels(path);
    FAIL();
  } catch (const jb::ParseError& e) {
    EXPECT_EQ(e.source(), path);
    EXPECT_EQ(e.line(), 2u);
  }
}
