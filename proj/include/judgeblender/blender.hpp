#pragma once

// Judge panels and the aggregator functions that fuse their labels.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "judgeblender/corpus_io.hpp"
#include "judgeblender/judge.hpp"

namespace judgeblender::blender {

enum class PanelVariant { kPromptBlender, kLLMBlender };

std::string_view variant_name(PanelVariant variant);
// "prompt" / "promptblender" or "llm" / "llmblender". Throws ConfigError.
PanelVariant parse_variant(std::string_view name);

struct Panel {
  std::string panel_id;
  PanelVariant variant = PanelVariant::kPromptBlender;
  std::vector<judge::JudgeConfig> judges;
};

// PromptBlender: one shared endpoint, pairwise-distinct templates.
// LLMBlender: pairwise-distinct endpoints. Judge ids unique. Throws ConfigError.
void validate(const Panel& panel);

enum class AggregationKind { kMajority, kAverage };
enum class TieBreak { kRandom, kMax, kMin, kAverage };

struct AggregationPolicy {
  AggregationKind kind = AggregationKind::kMajority;
  std::optional<TieBreak> tie_break = TieBreak::kAverage;  // set iff kind == kMajority
  std::uint64_t rng_seed = 0;
};

// "mv-rnd", "mv-max", "mv-min", "mv-avg", "av". Throws ConfigError.
AggregationPolicy parse_policy(std::string_view name, std::uint64_t seed = 0);
std::string policy_name(const AggregationPolicy& policy);

struct Vote {
  int label = 0;
  // Mode (or mean of tied modes for Avg, or arithmetic mean for AV) before
  // rounding.
  double fractional = 0.0;
  bool tie = false;
};

// Round half up: 0.5 -> 1, 1.5 -> 2, 2.5 -> 3.
int round_half_up(int numerator, int denominator);

// Modes of the multiset; ties resolved per `tie_break`. For kRandom the
// chosen mode is modes[random_draw % |modes|] with modes ascending.
// Throws std::invalid_argument on empty input.
Vote majority_vote(std::span<const int> labels, TieBreak tie_break,
                   std::uint64_t random_draw = 0);
Vote average_vote(std::span<const int> labels);
Vote aggregate(std::span<const int> labels, const AggregationPolicy& policy,
               std::uint64_t random_draw = 0);

// Per-pair draw for MV(Rnd): a pure function of (seed, query id, doc id).
std::uint64_t pair_draw(std::uint64_t seed, std::string_view query_id, std::string_view doc_id);

struct AggregatedLabel {
  std::string query_id;
  std::string doc_id;
  int final_label = 0;
  double fractional_score = 0.0;
  std::map<std::string, int> per_judge;
  bool tie_occurred = false;
  std::size_t panel_size = 0;  // coverage = per_judge.size() / panel_size
};

struct AggregateOptions {
  // Fail when judge sets cover different pairs instead of warning.
  bool strict_coverage = false;
};

struct PanelResult {
  corpus::QrelsSet qrels;
  std::vector<AggregatedLabel> labels;  // ascending (query_id, doc_id)
  std::vector<std::string> warnings;
};

// One record list per judge, each sorted by (query_id, doc_id) with no
// duplicates. Throws DataError on unsorted or duplicate input, or on
// uneven coverage when strict.
PanelResult aggregate_panel(const std::vector<std::vector<judge::JudgmentRecord>>& judgment_sets,
                            const AggregationPolicy& policy, const std::string& panel_id,
                            const AggregateOptions& options = {});

std::string to_jsonl(const std::vector<AggregatedLabel>& labels);

struct BlendOutputs {
  std::vector<std::string> judgment_files;
  std::string qrels_file;
  std::string sidecar_file;
};

struct BlendRun {
  PanelResult result;
  std::vector<judge::JudgeSummary> judge_summaries;
  BlendOutputs files;
};

// run_judge for every panel member, then aggregate_panel. When `out_dir` is
// non-empty the judgment files, the qrels and the sidecar are written there.
BlendRun blend_run(const Panel& panel, const AggregationPolicy& policy,
                   const judge::PairList& pairs, provider::ResponseCache* cache,
                   const judge::JudgeOptions& options, const std::string& out_dir,
                   const judge::ProgressFn& progress = {});

}  // namespace judgeblender::blender
