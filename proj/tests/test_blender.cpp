#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "judgeblender/blender.hpp"
#include "judgeblender/error.hpp"
#include "oracles/oracles.hpp"

namespace jb = judgeblender;
namespace b = judgeblender::blender;

namespace {

const std::pair<const char*, oracle::Policy> kPolicies[] = {
    {"mv-rnd", oracle::Policy::kMvRnd}, {"mv-max", oracle::Policy::kMvMax},
    {"mv-min", oracle::Policy::kMvMin}, {"mv-avg", oracle::Policy::kMvAvg},
    {"av", oracle::Policy::kAv}};

jb::judge::JudgmentRecord rec(const std::string& judge, const std::string& q, const std::string& d,
                              int label) {
  jb::judge::JudgmentRecord r;
  r.judge_id = judge;
  r.query_id = q;
  r.doc_id = d;
  r.label = label;
  r.raw_text = std::to_string(label);
  r.parse_status = jb::judge::ParseStatus::kClean;
  return r;
}

jb::judge::JudgeConfig judge_on(const std::string& id, const std::string& endpoint,
                                const std::string& stage) {
  jb::judge::JudgeConfig c;
  c.judge_id = id;
  c.endpoint.endpoint_id = endpoint;
  c.endpoint.kind = jb::provider::BackendKind::kMock;
  c.prompt.name = stage;
  c.prompt.family = jb::judge::PromptFamily::kDirectGrading;
  c.prompt.stages = {stage + " {query} {passage}"};
  return c;
}

}  // namespace

TEST(RoundHalfUp, Values) {
  EXPECT_EQ(b::round_half_up(1, 2), 1);
  EXPECT_EQ(b::round_half_up(3, 2), 2);
  EXPECT_EQ(b::round_half_up(5, 2), 3);
  EXPECT_EQ(b::round_half_up(4, 3), 1);
  EXPECT_EQ(b::round_half_up(5, 3), 2);
  EXPECT_EQ(b::round_half_up(0, 4), 0);
}

TEST(Aggregate, MatchesBruteForceOnAllSequences) {
  const auto sequences = oracle::all_label_sequences(5);
  ASSERT_EQ(sequences.size(), 1364u);
  for (const auto& seq : sequences) {
    for (const auto& [name, ref] : kPolicies) {
      const auto policy = b::parse_policy(name, 0);
      for (std::uint64_t draw : {0ULL, 1ULL, 2ULL, 5ULL}) {
        const auto got = b::aggregate(seq, policy, draw);
        const auto want = oracle::aggregate(seq, ref, draw);
        ASSERT_EQ(got.label, want.label) << name << " draw " << draw;
        ASSERT_EQ(got.tie, want.tie) << name;
      }
    }
  }
}

TEST(Aggregate, Properties) {
  for (const auto& seq : oracle::all_label_sequences(5)) {
    const int lo = *std::min_element(seq.begin(), seq.end());
    const int hi = *std::max_element(seq.begin(), seq.end());
    auto sorted = seq;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [name, ref] : kPolicies) {
      const auto policy = b::parse_policy(name, 0);
      const auto v = b::aggregate(seq, policy, 3);
      EXPECT_GE(v.label, lo);
      EXPECT_LE(v.label, hi);
      EXPECT_EQ(b::aggregate(sorted, policy, 3).label, v.label);
      if (lo == hi) EXPECT_EQ(v.label, lo);
    }
    const auto mn = b::majority_vote(seq, b::TieBreak::kMin);
    const auto av = b::majority_vote(seq, b::TieBreak::kAverage);
    const auto mx = b::majority_vote(seq, b::TieBreak::kMax);
    EXPECT_LE(mn.label, av.label);
    EXPECT_LE(av.label, mx.label);
    EXPECT_EQ(mn.tie, mx.tie);
  }
}

TEST(Aggregate, ThreeWayDisagreement) {
  std::vector<int> labels{0, 1, 2};
  const auto avg = b::majority_vote(labels, b::TieBreak::kAverage);
  EXPECT_TRUE(avg.tie);
  EXPECT_EQ(avg.label, 1);
  EXPECT_DOUBLE_EQ(avg.fractional, 1.0);
  EXPECT_EQ(b::majority_vote(labels, b::TieBreak::kMax).label, 2);
  EXPECT_EQ(b::majority_vote(labels, b::TieBreak::kMin).label, 0);
  std::vector<int> half{1, 2};
  EXPECT_EQ(b::majority_vote(half, b::TieBreak::kAverage).label, 2);
  EXPECT_DOUBLE_EQ(b::majority_vote(half, b::TieBreak::kAverage).fractional, 1.5);
  std::vector<int> av{0, 0, 1, 3};
  EXPECT_EQ(b::average_vote(av).label, 1);
  EXPECT_DOUBLE_EQ(b::average_vote(av).fractional, 1.0);
}

TEST(Aggregate, Errors) {
  std::vector<int> empty;
  EXPECT_THROW(b::majority_vote(empty, b::TieBreak::kMax), std::invalid_argument);
  EXPECT_THROW(b::average_vote(empty), std::invalid_argument);
  EXPECT_THROW(b::parse_policy("median"), jb::ConfigError);
}

TEST(Policy, NamesRoundTrip) {
  for (const auto& [name, ref] : kPolicies) EXPECT_EQ(b::policy_name(b::parse_policy(name)), name);
  EXPECT_FALSE(b::parse_policy("av").tie_break.has_value());
}

TEST(PairDraw, PureAndSeedSensitive) {
  EXPECT_EQ(b::pair_draw(7, "q1", "d1"), b::pair_draw(7, "q1", "d1"));
  EXPECT_NE(b::pair_draw(7, "q1", "d1"), b::pair_draw(8, "q1", "d1"));
  EXPECT_NE(b::pair_draw(7, "q1", "d1"), b::pair_draw(7, "q1d", "1"));
}

TEST(PairDraw, RandomTieBreakRoughlyUniform) {
  std::vector<int> labels{0, 3};
  int threes = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto v = b::majority_vote(labels, b::TieBreak::kRandom, b::pair_draw(1, "q", std::to_string(i)));
    threes += v.label == 3;
  }
  EXPECT_GT(threes, 850);
  EXPECT_LT(threes, 1150);
}

TEST(Panel, Validation) {
  b::Panel prompt{"pb", b::PanelVariant::kPromptBlender,
                  {judge_on("a", "llama", "one"), judge_on("b", "llama", "two")}};
  EXPECT_NO_THROW(b::validate(prompt));
  prompt.judges.push_back(judge_on("c", "mistral", "three"));
  EXPECT_THROW(b::validate(prompt), jb::ConfigError);
  prompt.judges.back() = judge_on("c", "llama", "one");
  EXPECT_THROW(b::validate(prompt), jb::ConfigError);

  b::Panel llm{"lb", b::PanelVariant::kLLMBlender,
               {judge_on("a", "llama", "one"), judge_on("b", "mistral", "one")}};
  EXPECT_NO_THROW(b::validate(llm));
  llm.judges.push_back(judge_on("c", "llama", "two"));
  EXPECT_THROW(b::validate(llm), jb::ConfigError);
  llm.judges.back() = judge_on("a", "gemma", "one");
  EXPECT_THROW(b::validate(llm), jb::ConfigError);
  EXPECT_THROW(b::validate(b::Panel{"empty", b::PanelVariant::kLLMBlender, {}}), jb::ConfigError);
  EXPECT_EQ(b::parse_variant("llmblender"), b::PanelVariant::kLLMBlender);
  EXPECT_EQ(b::parse_variant("prompt"), b::PanelVariant::kPromptBlender);
  EXPECT_THROW(b::parse_variant("mixture"), jb::ConfigError);
}

TEST(AggregatePanel, FusesJudges) {
  std::vector<std::vector<jb::judge::JudgmentRecord>> sets = {
      {rec("a", "q1", "d1", 3), rec("a", "q1", "d2", 0)},
      {rec("b", "q1", "d1", 3), rec("b", "q1", "d2", 1)},
      {rec("c", "q1", "d1", 1), rec("c", "q1", "d2", 2)},
  };
  const auto r = b::aggregate_panel(sets, b::parse_policy("mv-avg"), "lb");
  EXPECT_EQ(r.qrels.source_tag(), "lb+mv-avg");
  EXPECT_EQ(r.qrels.find("q1", "d1")->value(), 3);
  EXPECT_EQ(r.qrels.find("q1", "d2")->value(), 1);
  ASSERT_EQ(r.labels.size(), 2u);
  EXPECT_FALSE(r.labels[0].tie_occurred);
  EXPECT_TRUE(r.labels[1].tie_occurred);
  EXPECT_EQ(r.labels[1].per_judge.at("c"), 2);
  EXPECT_TRUE(r.warnings.empty());
  const auto line = b::to_jsonl(r.labels);
  EXPECT_NE(line.find("\"coverage\":1.0"), std::string::npos);
}

TEST(AggregatePanel, CoverageAndOrdering) {
  std::vector<std::vector<jb::judge::JudgmentRecord>> uneven = {
      {rec("a", "q1", "d1", 3), rec("a", "q1", "d2", 0)},
      {rec("b", "q1", "d1", 3)},
  };
  const auto r = b::aggregate_panel(uneven, b::parse_policy("av"), "p");
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.labels[1].per_judge.size(), 1u);
  EXPECT_EQ(r.labels[1].panel_size, 2u);
  EXPECT_THROW(b::aggregate_panel(uneven, b::parse_policy("av"), "p", {.strict_coverage = true}),
               jb::DataError);

  std::vector<std::vector<jb::judge::JudgmentRecord>> unsorted = {
      {rec("a", "q1", "d2", 3), rec("a", "q1", "d1", 0)}};
  EXPECT_THROW(b::aggregate_panel(unsorted, b::parse_policy("av"), "p"), jb::DataError);
  std::vector<std::vector<jb::judge::JudgmentRecord>> dup = {
      {rec("a", "q1", "d1", 3), rec("a", "q1", "d1", 0)}};
  EXPECT_THROW(b::aggregate_panel(dup, b::parse_policy("av"), "p"), jb::DataError);
  EXPECT_THROW(b::aggregate_panel({}, b::parse_policy("av"), "p"), jb::ConfigError);
}

TEST(AggregatePanel, RandomTieBreakIsDeterministicPerSeed) {
  std::vector<std::vector<jb::judge::JudgmentRecord>> sets(2);
  for (int i = 0; i < 50; ++i) {
    char doc[8];
    std::snprintf(doc, sizeof(doc), "d%03d", i);
    sets[0].push_back(rec("a", "q", doc, 0));
    sets[1].push_back(rec("b", "q", doc, 3));
  }
  const auto one = b::aggregate_panel(sets, b::parse_policy("mv-rnd", 42), "p");
  const auto two = b::aggregate_panel(sets, b::parse_policy("mv-rnd", 42), "p");
  const auto other = b::aggregate_panel(sets, b::parse_policy("mv-rnd", 43), "p");
  EXPECT_EQ(one.qrels, two.qrels);
  EXPECT_NE(one.qrels, other.qrels);
}

TEST(BlendRun, MockPanelWritesFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "jb_blend_run";
  std::filesystem::remove_all(dir);
  b::Panel panel{"lb", b::PanelVariant::kLLMBlender, {}};
  for (int i = 0; i < 3; ++i) {
    auto j = judge_on("j" + std::to_string(i), "mock" + std::to_string(i), "rate");
    j.endpoint.mock_seed = static_cast<std::uint64_t>(i);
    panel.judges.push_back(j);
  }
  jb::judge::PairList pairs;
  for (int i = 0; i < 12; ++i) {
    pairs.push_back({{"q" + std::to_string(i % 3), "query"}, {"d" + std::to_string(i), "passage " + std::to_string(i)}});
  }
  const auto run = b::blend_run(panel, b::parse_policy("mv-avg"), pairs, nullptr, {}, dir.string());
  EXPECT_EQ(run.result.labels.size(), 12u);
  EXPECT_EQ(run.files.judgment_files.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(dir / "lb.mv-avg.qrels"));
  EXPECT_TRUE(std::filesystem::exists(dir / "lb.mv-avg.agg.jsonl"));
  EXPECT_EQ(run.judge_summaries[0].pairs, 12u);
}
