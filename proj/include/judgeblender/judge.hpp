#pragma once

// A single judge: prompt rendering, provider calls, and label parsing for the
// three prompt families.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "judgeblender/corpus_io.hpp"
#include "judgeblender/provider.hpp"

namespace judgeblender::judge {

enum class PromptFamily { kDirectGrading, kMultiCriteria, kTwoStep };

std::string_view family_name(PromptFamily family);
// Accepts "direct", "multi_criteria", "two_step". Throws ConfigError.
PromptFamily parse_family(std::string_view name);

// Stage counts: DirectGrading 1; TwoStep 2 (binary, grade); MultiCriteria 5
// (exactness, coverage, topicality, contextual fit, final).
std::size_t stage_count(PromptFamily family);

struct PromptTemplate {
  std::string name;
  PromptFamily family = PromptFamily::kDirectGrading;
  std::vector<std::string> stages;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

// Placeholders `{name}` found in a template stage, in order of appearance.
std::vector<std::string> placeholders(std::string_view stage_text);
// Checks stage count and that each stage uses only its declared placeholders.
void validate(const PromptTemplate& tmpl);

// name -> template, loaded from a JSON manifest:
//   {"templates": {"<name>": {"family": "...", "stages": ["file", ...]}}}
// Stage file paths are relative to the manifest.
using TemplateLibrary = std::map<std::string, PromptTemplate>;
TemplateLibrary load_template_manifest(const std::string& manifest_path);

struct JudgeConfig {
  std::string judge_id;
  provider::JudgeEndpoint endpoint;
  PromptTemplate prompt;
};

struct RenderedPrompt {
  std::string text;
  bool truncated = false;
};

// Plain substitution of {query}, {passage} and any `extra` names. A passage
// longer than `passage_budget` characters (bytes, cut on a UTF-8 boundary)
// is tail-truncated. Throws ConfigError naming an unresolved placeholder.
RenderedPrompt render_prompt(std::string_view template_stage, const corpus::Query& query,
                             const corpus::Passage& passage,
                             const std::map<std::string, std::string>& extra = {},
                             std::size_t passage_budget = 6000);

enum class ParseStatus { kClean, kLenient, kDefaulted };

std::string_view status_name(ParseStatus status);
ParseStatus parse_status_name(std::string_view name);

struct LabelRange {
  int lo = 0;
  int hi = 3;
};

struct LabelParse {
  int label = 0;
  ParseStatus status = ParseStatus::kDefaulted;
};

// Strict: the trimmed text is a single in-range integer (clean). Lenient: the
// first standalone in-range integer token. Otherwise {range.lo, kDefaulted};
// retrying is the caller's business.
LabelParse parse_label(std::string_view text, LabelRange range = {});

struct JudgmentRecord {
  std::string query_id;
  std::string doc_id;
  std::string judge_id;
  int label = 0;
  std::string raw_text;
  ParseStatus parse_status = ParseStatus::kDefaulted;
  // Present for TwoStep (binary verdict[, grade]) and MultiCriteria (four
  // criterion scores, final label).
  std::optional<std::vector<int>> stage_labels;
  std::vector<ParseStatus> stage_status;
  bool truncated = false;
  std::string error;  // provider failure, if any
  int provider_calls = 0;  // not serialized

  friend bool operator==(const JudgmentRecord& a, const JudgmentRecord& b) {
    return a.query_id == b.query_id && a.doc_id == b.doc_id && a.judge_id == b.judge_id &&
           a.label == b.label && a.raw_text == b.raw_text &&
           a.parse_status == b.parse_status && a.stage_labels == b.stage_labels &&
           a.stage_status == b.stage_status && a.truncated == b.truncated &&
           a.error == b.error;
  }
};

// JSONL, one record per line.
std::string to_jsonl(const std::vector<JudgmentRecord>& records);
std::vector<JudgmentRecord> parse_judgments(std::string_view jsonl,
                                            const std::string& source_name = "<judgments>");
std::vector<JudgmentRecord> load_judgments(const std::string& path);

struct JudgeOptions {
  std::size_t passage_budget = 6000;
  // One extra call with a reminder appended when the output does not parse.
  bool parse_retry = true;
  // Rethrow provider failures instead of recording a defaulted label.
  bool fail_fast = false;
  // When set, prompts carry the stage-appropriate gold answer as an oracle
  // marker (for the copy-gold mock profile).
  const corpus::QrelsSet* gold_hints = nullptr;
  // Overrides endpoint.max_parallel when > 0.
  int max_parallel = 0;
};

inline constexpr std::string_view kRetryReminder = "\n\nAnswer with a single integer.";

// Binds a judge to a backend and an optional cache.
class Judge {
 public:
  Judge(JudgeConfig config, provider::CompletionBackend& backend,
        provider::ResponseCache* cache = nullptr, JudgeOptions options = {});

  const JudgeConfig& config() const noexcept { return config_; }
  const JudgeOptions& options() const noexcept { return options_; }

  JudgmentRecord judge(const corpus::Query& query, const corpus::Passage& passage) const;

  JudgmentRecord judge_direct(const corpus::Query& query, const corpus::Passage& passage) const;
  JudgmentRecord judge_two_step(const corpus::Query& query,
                                const corpus::Passage& passage) const;
  JudgmentRecord judge_multicriteria(const corpus::Query& query,
                                     const corpus::Passage& passage) const;

 private:
  struct StageResult {
    LabelParse parse;
    std::string raw_text;
    std::string error;
    bool truncated = false;
    int calls = 0;
  };

  StageResult run_stage(std::size_t stage, LabelRange range, const corpus::Query& query,
                        const corpus::Passage& passage,
                        const std::map<std::string, std::string>& extra,
                        std::optional<int> oracle_answer) const;
  std::string call(const std::string& prompt) const;
  std::optional<int> gold_for(const corpus::Query& query, const corpus::Passage& passage) const;
  JudgmentRecord blank_record(const corpus::Query& query, const corpus::Passage& passage) const;

  JudgeConfig config_;
  provider::CompletionBackend* backend_;
  provider::ResponseCache* cache_;
  JudgeOptions options_;
};

struct JudgeSummary {
  std::size_t pairs = 0;
  std::size_t clean = 0;
  std::size_t lenient = 0;
  std::size_t defaulted = 0;
  std::size_t provider_failures = 0;
  std::size_t truncated = 0;
};

using PairList = std::vector<std::pair<corpus::Query, corpus::Passage>>;
using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

struct JudgeRun {
  std::vector<JudgmentRecord> records;  // sorted by (query_id, doc_id)
  JudgeSummary summary;
};

// One record per pair; per-pair failures are recorded and the batch continues.
// Throws ConfigError for an empty pair list or a bad template/endpoint.
JudgeRun run_judge(const Judge& judge, const PairList& pairs, const ProgressFn& progress = {});

// Builds the (query, passage) list for every key in `pairs_from`. Throws
// DataError when a query or passage text is missing.
PairList make_pairs(const corpus::QrelsSet& pairs_from, const std::vector<corpus::Query>& queries,
                    const std::vector<corpus::Passage>& passages);

// Runs fn(i) for i in [0, total) on at most `concurrency` threads.
void for_each_bounded(std::size_t total, int concurrency,
                      const std::function<void(std::size_t)>& fn);

}  // namespace judgeblender::judge
