#pragma once

// Pipeline orchestration: system scoring under two qrels, ranking
// correlation, bias-by-category analysis, configuration and reports.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "judgeblender/blender.hpp"
#include "judgeblender/corpus_io.hpp"
#include "judgeblender/judge.hpp"
#include "judgeblender/metrics.hpp"

namespace judgeblender::harness {

enum class Metric { kNdcg, kMap };

struct MetricSpec {
  Metric metric = Metric::kNdcg;
  int k = 10;  // NDCG cutoff

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

// "ndcg@10", "ndcg@<k>", "map". Throws ConfigError.
MetricSpec parse_metric(std::string_view name);
std::string metric_name(const MetricSpec& spec);

struct EvalOptions {
  // Fail on run queries absent from the qrels instead of warning.
  bool strict = false;
};

struct RunScores {
  std::map<std::string, double> scores;  // run_tag -> mean metric
  std::vector<std::string> warnings;
};

// Per-run mean over the qrels' queries (a query missing from a run scores 0).
// MAP skips queries without a relevant document. Throws DataError when the
// run list is empty, tags repeat, or a run shares no query with the qrels.
RunScores evaluate_runs(const std::vector<corpus::RunRanking>& runs, const corpus::QrelsSet& qrels,
                        const MetricSpec& spec, const EvalOptions& options = {});

struct SystemScore {
  std::string run_tag;
  double value_under_gold = 0.0;
  double value_under_generated = 0.0;
};

struct RankCorrelation {
  MetricSpec metric;
  std::vector<SystemScore> systems;  // ascending run_tag
  double tau = 0.0;
  double rho = 0.0;
  std::vector<std::string> warnings;
};

// Throws DataError for fewer than two runs or a constant score vector.
RankCorrelation system_ranking_correlation(const corpus::QrelsSet& gold,
                                           const corpus::QrelsSet& generated,
                                           const std::vector<corpus::RunRanking>& runs,
                                           const MetricSpec& spec,
                                           const EvalOptions& options = {});

enum class BiasCategory { kGpt, kT5, kGptT5, kOther };

inline constexpr std::array<BiasCategory, 4> kAllCategories = {
    BiasCategory::kGpt, BiasCategory::kT5, BiasCategory::kGptT5, BiasCategory::kOther};

std::string_view category_name(BiasCategory category);
// "GPT", "T5", "GPT+T5", "other" (case-insensitive). Throws DataError.
BiasCategory parse_category(std::string_view name);

using CategoryMap = std::map<std::string, BiasCategory>;

// Two-column CSV `run_tag,category`; an optional header row is skipped.
CategoryMap parse_categories(std::string_view csv, const std::string& source_name = "<categories>");
CategoryMap load_categories(const std::string& path);

struct ScatterPoint {
  std::string run_tag;
  double x = 0.0;  // under gold
  double y = 0.0;  // under generated
  BiasCategory category = BiasCategory::kOther;
};

struct BiasAnalysis {
  std::vector<ScatterPoint> points;  // ascending run_tag
  std::map<BiasCategory, std::size_t> counts;
  // Mean of y - x per category; absent for empty categories.
  std::map<BiasCategory, std::optional<double>> residual_mean;
  std::vector<std::string> warnings;
};

// Throws DataError when the score maps cover different runs.
BiasAnalysis bias_scatter(const std::map<std::string, double>& gold_scores,
                          const std::map<std::string, double>& generated_scores,
                          const CategoryMap& categories);

std::string scatter_csv(const BiasAnalysis& analysis);

struct RankEval {
  RankCorrelation correlation;
  BiasAnalysis bias;
};

RankEval rank_eval(const corpus::QrelsSet& gold, const corpus::QrelsSet& generated,
                   const std::vector<corpus::RunRanking>& runs, const MetricSpec& spec,
                   const CategoryMap& categories, const EvalOptions& options = {});

std::string to_json(const RankEval& eval, int indent = 2);

// One row shaped like the judgment/system-ranking correlation table.
struct ReportRow {
  std::string name;
  double kappa = 0.0;
  std::optional<double> alpha;
  metrics::AlphaLevel alpha_level = metrics::AlphaLevel::kOrdinal;
  std::optional<double> tau_ndcg;
  std::optional<double> rho_ndcg;
  std::optional<double> tau_map;
  std::optional<double> rho_map;
  std::size_t n_pairs = 0;
  std::size_t n_systems = 0;
  std::vector<std::string> warnings;
};

// Correlation columns stay empty when `runs` is empty.
ReportRow report_row(const std::string& name, const corpus::QrelsSet& gold,
                     const corpus::QrelsSet& generated,
                     const std::vector<corpus::RunRanking>& runs,
                     metrics::AlphaLevel level = metrics::AlphaLevel::kOrdinal,
                     const EvalOptions& options = {});

std::string to_text(const ReportRow& row);
std::string to_json(const ReportRow& row, int indent = 2);

// --- configuration ---

struct PipelineConfig {
  std::string source_path;
  std::uint64_t seed = 0;
  std::size_t passage_budget = 6000;
  blender::AggregationPolicy policy;
  std::string cache_path;  // empty: in-memory cache
  std::map<std::string, provider::JudgeEndpoint> endpoints;
  std::vector<judge::JudgeConfig> judges;
  blender::Panel panel;
};

// Seed of a mock endpoint: a mix of the pipeline seed and the endpoint's own.
std::uint64_t mix_seed(std::uint64_t pipeline_seed, std::uint64_t endpoint_seed);

// JSON config; relative paths resolve against the config file's directory.
// `seed_override` replaces the file's seed. Throws ConfigError.
PipelineConfig parse_config(std::string_view json_text, const std::string& base_dir,
                            std::optional<std::uint64_t> seed_override = std::nullopt);
PipelineConfig load_config(const std::string& path,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

const judge::JudgeConfig& find_judge(const PipelineConfig& config, const std::string& judge_id);

// --- synthetic fixtures ---

struct SynthOptions {
  std::size_t n_queries = 10;
  std::size_t docs_per_query = 20;
  std::size_t n_runs = 8;
  std::uint64_t seed = 1;
  // Relative label frequencies for 0..3.
  std::array<double, 4> label_weights = {2005, 1233, 808, 377};
};

struct SynthCorpus {
  std::vector<corpus::Query> queries;
  std::vector<corpus::Passage> passages;
  corpus::QrelsSet qrels;
  std::vector<corpus::RunRanking> runs;
  CategoryMap categories;
};

// Deterministic in `options`. Run i ranks every judged passage by a noisy
// score whose noise grows with i, so system quality decreases with i.
SynthCorpus synthesize(const SynthOptions& options);

// queries.tsv, passages.tsv, qrels.txt, runs/<tag>.run, categories.csv.
void write_synth(const SynthCorpus& corpus, const std::string& out_dir);

}  // namespace judgeblender::harness
