#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "judgeblender/corpus_io.hpp"
#include "judgeblender/error.hpp"
#include "judgeblender/harness.hpp"
#include "judgeblender/metrics.hpp"
#include "oracles/oracles.hpp"

namespace jb = judgeblender;
namespace h = judgeblender::harness;
namespace c = judgeblender::corpus;

namespace {

const std::string kSource = JB_SOURCE_DIR;

// Run i puts d0 at rank i and d3 at rank 3 - i.
std::vector<c::RunRanking> crossing_runs() {
  const std::vector<std::vector<std::string>> orders = {
      {"d0", "d1", "d2", "d3"}, {"d1", "d0", "d3", "d2"},
      {"d2", "d3", "d0", "d1"}, {"d3", "d2", "d1", "d0"}};
  std::vector<c::RunRanking> runs;
  for (std::size_t r = 0; r < orders.size(); ++r) {
    c::RunRanking run("run" + std::to_string(r));
    for (std::size_t i = 0; i < orders[r].size(); ++i) run.add("q1", orders[r][i], 10.0 - i);
    runs.push_back(run);
  }
  return runs;
}

c::QrelsSet one_relevant(const std::string& doc) {
  c::QrelsSet q;
  for (const char* d : {"d0", "d1", "d2", "d3"}) q.insert("q1", d, c::RelevanceLabel(d == doc ? 3 : 0));
  return q;
}

}  // namespace

TEST(Metric, Parse) {
  EXPECT_EQ(h::parse_metric("ndcg@10"), (h::MetricSpec{h::Metric::kNdcg, 10}));
  EXPECT_EQ(h::parse_metric("ndcg@5").k, 5);
  EXPECT_EQ(h::parse_metric("ndcg").k, 10);
  EXPECT_EQ(h::parse_metric("map").metric, h::Metric::kMap);
  EXPECT_EQ(h::metric_name(h::parse_metric("ndcg@3")), "ndcg@3");
  EXPECT_THROW(h::parse_metric("p@10"), jb::ConfigError);
  EXPECT_THROW(h::parse_metric("ndcg@0"), jb::ConfigError);
}

TEST(Evaluate, MeansAndMissingQueries) {
  const auto qrels = c::parse_qrels("q1 0 a 2\nq1 0 b 0\nq2 0 c 2\nq3 0 d 0\n");
  c::RunRanking run("r");
  run.add("q1", "a", 2);
  run.add("q1", "b", 1);
  run.add("q9", "z", 1);
  const auto ndcg = h::evaluate_runs({run}, qrels, h::parse_metric("ndcg@10"));
  // q1 perfect, q2 missing scores 0, q3 has no relevant docs scores 0.
  EXPECT_NEAR(ndcg.scores.at("r"), 1.0 / 3.0, 1e-12);
  ASSERT_EQ(ndcg.warnings.size(), 1u);
  EXPECT_NE(ndcg.warnings[0].find("q9"), std::string::npos);
  const auto map = h::evaluate_runs({run}, qrels, h::parse_metric("map"));
  // MAP averages over q1 and q2 only.
  EXPECT_NEAR(map.scores.at("r"), 0.5, 1e-12);
  EXPECT_THROW(h::evaluate_runs({run}, qrels, h::parse_metric("map"), {.strict = true}), jb::DataError);
}

TEST(Evaluate, Errors) {
  const auto qrels = c::parse_qrels("q1 0 a 1\n");
  c::RunRanking disjoint("x");
  disjoint.add("q2", "a", 1);
  EXPECT_THROW(h::evaluate_runs({disjoint}, qrels, {}), jb::DataError);
  EXPECT_THROW(h::evaluate_runs({}, qrels, {}), jb::DataError);
  c::RunRanking a("same");
  a.add("q1", "a", 1);
  EXPECT_THROW(h::evaluate_runs({a, a}, qrels, {}), jb::DataError);
}

TEST(Correlation, IdenticalQrelsGiveOne) {
  const auto gold = one_relevant("d0");
  const auto r = h::system_ranking_correlation(gold, gold, crossing_runs(), {});
  EXPECT_DOUBLE_EQ(r.tau, 1.0);
  EXPECT_DOUBLE_EQ(r.rho, 1.0);
  ASSERT_EQ(r.systems.size(), 4u);
  EXPECT_EQ(r.systems[0].run_tag, "run0");
}

TEST(Correlation, FlippedQrelsGiveMinusOne) {
  const auto r = h::system_ranking_correlation(one_relevant("d0"), one_relevant("d3"),
                                               crossing_runs(), h::parse_metric("ndcg@10"));
  EXPECT_NEAR(r.tau, -1.0, 1e-12);
  EXPECT_NEAR(r.rho, -1.0, 1e-12);
  const auto m = h::system_ranking_correlation(one_relevant("d0"), one_relevant("d3"),
                                               crossing_runs(), h::parse_metric("map"));
  EXPECT_NEAR(m.tau, -1.0, 1e-12);
}

TEST(Correlation, DegenerateInputs) {
  const auto gold = one_relevant("d0");
  auto runs = crossing_runs();
  EXPECT_THROW(h::system_ranking_correlation(gold, gold, {runs[0]}, {}), jb::DataError);
  c::QrelsSet nothing;
  for (const char* d : {"d0", "d1", "d2", "d3"}) nothing.insert("q1", d, c::RelevanceLabel(0));
  EXPECT_THROW(h::system_ranking_correlation(gold, nothing, runs, {}), jb::DataError);
}

TEST(Categories, ParseAndDefault) {
  const auto cats = h::parse_categories("run_tag,category\n# comment\nr1,GPT\nr2,t5\nr3,gpt+t5\n");
  EXPECT_EQ(cats.at("r1"), h::BiasCategory::kGpt);
  EXPECT_EQ(cats.at("r2"), h::BiasCategory::kT5);
  EXPECT_EQ(cats.at("r3"), h::BiasCategory::kGptT5);
  EXPECT_THROW(h::parse_categories("r1,GPT\nr1,T5\n"), jb::ParseError);
  EXPECT_THROW(h::parse_categories("r1,BERT\n"), jb::DataError);
  EXPECT_EQ(h::parse_category("Other"), h::BiasCategory::kOther);
  for (auto cat : h::kAllCategories) EXPECT_EQ(h::parse_category(h::category_name(cat)), cat);

  const auto b = h::bias_scatter({{"r1", 0.5}, {"r9", 0.4}}, {{"r1", 0.6}, {"r9", 0.4}}, cats);
  EXPECT_EQ(b.points[1].category, h::BiasCategory::kOther);
  ASSERT_EQ(b.warnings.size(), 1u);
  EXPECT_EQ(b.warnings[0], "run 'r9' has no category; using other");
  EXPECT_THROW(h::bias_scatter({{"r1", 0.5}}, {{"r2", 0.5}}, cats), jb::DataError);
}

TEST(Bias, InflatedCategoryShowsPositiveResidual) {
  std::map<std::string, double> gold, generated;
  h::CategoryMap cats;
  oracle::Rng rng(4);
  for (int i = 0; i < 40; ++i) {
    const std::string tag = "run" + std::to_string(i);
    const double x = 0.2 + 0.6 * rng.unit();
    const auto cat = h::kAllCategories[i % 4];
    cats[tag] = cat;
    gold[tag] = x;
    generated[tag] = x + (cat == h::BiasCategory::kGpt ? 0.05 : 0.0);
  }
  const auto b = h::bias_scatter(gold, generated, cats);
  EXPECT_NEAR(*b.residual_mean.at(h::BiasCategory::kGpt), 0.05, 1e-12);
  EXPECT_NEAR(*b.residual_mean.at(h::BiasCategory::kT5), 0.0, 1e-12);
  EXPECT_EQ(b.counts.at(h::BiasCategory::kGptT5), 10u);
  const auto csv = h::scatter_csv(b);
  EXPECT_EQ(csv.rfind("run_tag,category,gold,generated\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41);
}

TEST(Report, RowAndJson) {
  const auto gold = one_relevant("d0");
  const auto row = h::report_row("self", gold, gold, crossing_runs());
  EXPECT_DOUBLE_EQ(row.kappa, 1.0);
  EXPECT_DOUBLE_EQ(*row.alpha, 1.0);
  EXPECT_DOUBLE_EQ(*row.tau_ndcg, 1.0);
  EXPECT_EQ(row.n_pairs, 4u);
  EXPECT_EQ(row.n_systems, 4u);
  const auto text = h::to_text(row);
  EXPECT_NE(text.find("tau(NDCG@10)"), std::string::npos);
  EXPECT_NE(text.find("1.0000"), std::string::npos);
  const auto bare = h::report_row("bare", gold, gold, {});
  EXPECT_FALSE(bare.tau_ndcg.has_value());
  EXPECT_NE(h::to_json(bare).find("\"kendall_tau\": null"), std::string::npos);

  const auto eval = h::rank_eval(gold, gold, crossing_runs(), {}, {});
  const auto json = h::to_json(eval);
  EXPECT_NE(json.find("\"kendall_tau\": 1.0"), std::string::npos);
  EXPECT_NE(json.find("\"n_systems\": 4"), std::string::npos);
}

TEST(Config, LoadsShippedMockConfigs) {
  const auto cfg = h::load_config(kSource + "/configs/mock_llmblender.json");
  EXPECT_EQ(cfg.seed, 13u);
  EXPECT_EQ(cfg.judges.size(), 3u);
  EXPECT_EQ(cfg.panel.panel_id, "llmblender");
  EXPECT_EQ(cfg.panel.variant, jb::blender::PanelVariant::kLLMBlender);
  const auto& a = h::find_judge(cfg, "a-direct");
  EXPECT_EQ(a.endpoint.kind, jb::provider::BackendKind::kMock);
  EXPECT_EQ(a.endpoint.mock_seed, h::mix_seed(13, 1));
  EXPECT_EQ(a.endpoint.model_name, "mock-a");
  EXPECT_THROW(h::find_judge(cfg, "zzz"), jb::ConfigError);

  const auto reseeded = h::load_config(kSource + "/configs/mock_llmblender.json", 99);
  EXPECT_EQ(reseeded.seed, 99u);
  EXPECT_NE(h::find_judge(reseeded, "a-direct").endpoint.mock_seed, a.endpoint.mock_seed);

  for (const char* name : {"mock_promptblender.json", "mock_copy_gold.json", "http_llmblender.json"}) {
    EXPECT_NO_THROW(h::load_config(kSource + "/configs/" + name)) << name;
  }
}

TEST(Config, RejectsBadInput) {
  const std::string base = kSource + "/configs";
  EXPECT_THROW(h::parse_config("{", base), jb::ConfigError);
  EXPECT_THROW(h::parse_config("[]", base), jb::ConfigError);
  const std::string unknown_endpoint = R"({"templates": "../templates/manifest.json",
    "endpoints": {}, "judges": [{"id": "j", "endpoint": "nope", "template": "direct"}],
    "panel": {"id": "p", "variant": "llm", "judges": ["j"]}})";
  EXPECT_THROW(h::parse_config(unknown_endpoint, base), jb::ConfigError);
  const std::string bad_backend = R"({"templates": "../templates/manifest.json",
    "endpoints": {"e": {"backend": "grpc"}}, "judges": [], "panel": {"id": "p", "judges": []}})";
  EXPECT_THROW(h::parse_config(bad_backend, base), jb::ConfigError);
}

TEST(Synth, DeterministicAndShaped) {
  h::SynthOptions opts;
  opts.n_queries = 4;
  opts.docs_per_query = 6;
  opts.n_runs = 5;
  opts.seed = 11;
  const auto a = h::synthesize(opts);
  const auto b = h::synthesize(opts);
  EXPECT_EQ(a.qrels, b.qrels);
  EXPECT_EQ(a.runs, b.runs);
  EXPECT_EQ(a.qrels.size(), 24u);
  EXPECT_EQ(a.queries.size(), 4u);
  EXPECT_EQ(a.runs.size(), 5u);
  EXPECT_EQ(a.categories.size(), 5u);
  opts.seed = 12;
  EXPECT_NE(h::synthesize(opts).qrels, a.qrels);

  const auto dir = std::filesystem::temp_directory_path() / "jb_synth_test";
  std::filesystem::remove_all(dir);
  h::write_synth(a, dir.string());
  EXPECT_EQ(c::load_qrels((dir / "qrels.txt").string()), a.qrels);
  EXPECT_EQ(c::load_run_dir((dir / "runs").string()).size(), 5u);
  EXPECT_EQ(h::load_categories((dir / "categories.csv").string()), a.categories);
}
