#include "judgeblender/blender.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <set>
#include <stdexcept>

#include "judgeblender/error.hpp"
#include "json.hpp"

namespace judgeblender::blender {

namespace {

using json = nlohmann::json;

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::array<int, 4> histogram(std::span<const int> labels) {
  std::array<int, 4> counts{};
  for (int l : labels) {
    if (l < 0 || l > 3) throw std::invalid_argument("label outside 0-3");
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

}  // namespace

std::string_view variant_name(PanelVariant variant) {
  return variant == PanelVariant::kPromptBlender ? "promptblender" : "llmblender";
}

PanelVariant parse_variant(std::string_view name) {
  if (name == "prompt" || name == "promptblender") return PanelVariant::kPromptBlender;
  if (name == "llm" || name == "llmblender") return PanelVariant::kLLMBlender;
  throw ConfigError("unknown panel variant '" + std::string(name) + "' (expected prompt or llm)");
}

void validate(const Panel& panel) {
  if (panel.panel_id.empty()) throw ConfigError("panel id must not be empty");
  if (panel.judges.empty()) throw ConfigError("panel '" + panel.panel_id + "' has no judges");
  std::set<std::string> ids;
  for (const auto& j : panel.judges) {
    if (!ids.insert(j.judge_id).second) {
      throw ConfigError("panel '" + panel.panel_id + "': duplicate judge id '" + j.judge_id + "'");
    }
  }
  if (panel.variant == PanelVariant::kPromptBlender) {
    for (std::size_t i = 0; i < panel.judges.size(); ++i) {
      if (panel.judges[i].endpoint.endpoint_id != panel.judges[0].endpoint.endpoint_id) {
        throw ConfigError("PromptBlender panel '" + panel.panel_id +
                          "' must use a single endpoint; judge '" + panel.judges[i].judge_id +
                          "' uses '" + panel.judges[i].endpoint.endpoint_id + "'");
      }
      for (std::size_t k = 0; k < i; ++k) {
        if (panel.judges[i].prompt.family == panel.judges[k].prompt.family &&
            panel.judges[i].prompt.stages == panel.judges[k].prompt.stages) {
          throw ConfigError("PromptBlender panel '" + panel.panel_id + "': judges '" +
                            panel.judges[k].judge_id + "' and '" + panel.judges[i].judge_id +
                            "' share a template");
        }
      }
    }
  } else {
    std::set<std::string> endpoints;
    for (const auto& j : panel.judges) {
      if (!endpoints.insert(j.endpoint.endpoint_id).second) {
        throw ConfigError("LLMBlender panel '" + panel.panel_id + "': endpoint '" +
                          j.endpoint.endpoint_id + "' used by more than one judge");
      }
    }
  }
}

AggregationPolicy parse_policy(std::string_view name, std::uint64_t seed) {
  AggregationPolicy p;
  p.rng_seed = seed;
  if (name == "av") {
    p.kind = AggregationKind::kAverage;
    p.tie_break.reset();
    return p;
  }
  p.kind = AggregationKind::kMajority;
  if (name == "mv-rnd") {
    p.tie_break = TieBreak::kRandom;
  } else if (name == "mv-max") {
    p.tie_break = TieBreak::kMax;
  } else if (name == "mv-min") {
    p.tie_break = TieBreak::kMin;
  } else if (name == "mv-avg") {
    p.tie_break = TieBreak::kAverage;
  } else {
    throw ConfigError("unknown policy '" + std::string(name) +
                      "' (expected mv-rnd, mv-max, mv-min, mv-avg or av)");
  }
  return p;
}

std::string policy_name(const AggregationPolicy& policy) {
  if (policy.kind == AggregationKind::kAverage) return "av";
  switch (policy.tie_break.value_or(TieBreak::kAverage)) {
    case TieBreak::kRandom: return "mv-rnd";
    case TieBreak::kMax: return "mv-max";
    case TieBreak::kMin: return "mv-min";
    case TieBreak::kAverage: return "mv-avg";
  }
  return "mv-avg";
}

int round_half_up(int numerator, int denominator) {
  // Non-negative operands: floor(n/d + 1/2) = floor((2n + d) / 2d).
  return (2 * numerator + denominator) / (2 * denominator);
}

Vote majority_vote(std::span<const int> labels, TieBreak tie_break, std::uint64_t random_draw) {
  if (labels.empty()) throw std::invalid_argument("majority_vote needs at least one label");
  const auto counts = histogram(labels);
  const int top = *std::max_element(counts.begin(), counts.end());
  std::vector<int> modes;
  for (int l = 0; l < 4; ++l) {
    if (counts[static_cast<std::size_t>(l)] == top) modes.push_back(l);
  }
  Vote v;
  if (modes.size() == 1) {
    v.label = modes.front();
    v.fractional = v.label;
    return v;
  }
  v.tie = true;
  switch (tie_break) {
    case TieBreak::kRandom:
      v.label = modes[random_draw % modes.size()];
      v.fractional = v.label;
      break;
    case TieBreak::kMax:
      v.label = modes.back();
      v.fractional = v.label;
      break;
    case TieBreak::kMin:
      v.label = modes.front();
      v.fractional = v.label;
      break;
    case TieBreak::kAverage: {
      int sum = 0;
      for (int m : modes) sum += m;
      const int n = static_cast<int>(modes.size());
      v.fractional = static_cast<double>(sum) / n;
      v.label = round_half_up(sum, n);
      break;
    }
  }
  return v;
}

Vote average_vote(std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("average_vote needs at least one label");
  histogram(labels);
  int sum = 0;
  for (int l : labels) sum += l;
  const int n = static_cast<int>(labels.size());
  Vote v;
  v.fractional = static_cast<double>(sum) / n;
  v.label = round_half_up(sum, n);
  return v;
}

Vote aggregate(std::span<const int> labels, const AggregationPolicy& policy,
               std::uint64_t random_draw) {
  if (policy.kind == AggregationKind::kAverage) return average_vote(labels);
  return majority_vote(labels, policy.tie_break.value_or(TieBreak::kAverage), random_draw);
}

std::uint64_t pair_draw(std::uint64_t seed, std::string_view query_id, std::string_view doc_id) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (int shift = 0; shift < 64; shift += 8) {
    const char byte = static_cast<char>((seed >> shift) & 0xFF);
    h = fnv1a(h, std::string_view(&byte, 1));
  }
  h = fnv1a(h, query_id);
  h = fnv1a(h, std::string_view("\0", 1));
  h = fnv1a(h, doc_id);
  return splitmix64_mix(h);
}

PanelResult aggregate_panel(const std::vector<std::vector<judge::JudgmentRecord>>& judgment_sets,
                            const AggregationPolicy& policy, const std::string& panel_id,
                            const AggregateOptions& options) {
  if (judgment_sets.empty()) throw ConfigError("aggregate_panel needs at least one judge");
  using Key = corpus::PairKey;
  std::map<Key, std::vector<std::pair<std::string, int>>> by_pair;
  std::vector<std::size_t> coverage(judgment_sets.size(), 0);
  std::set<std::string> judge_ids;
  for (std::size_t j = 0; j < judgment_sets.size(); ++j) {
    const auto& set = judgment_sets[j];
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& r = set[i];
      if (i > 0) {
        const auto& prev = set[i - 1];
        const auto order = std::tie(prev.query_id, prev.doc_id) <=> std::tie(r.query_id, r.doc_id);
        if (order == std::strong_ordering::equal) {
          throw DataError("judge '" + r.judge_id + "' has two records for (" + r.query_id + ", " +
                          r.doc_id + ")");
        }
        if (order == std::strong_ordering::greater) {
          throw DataError("judgments of '" + r.judge_id +
                          "' are not sorted by (query_id, doc_id)");
        }
      }
      corpus::RelevanceLabel checked(r.label);
      by_pair[Key{r.query_id, r.doc_id}].emplace_back(r.judge_id, checked.value());
    }
    coverage[j] = set.size();
    if (!set.empty() && !judge_ids.insert(set.front().judge_id).second) {
      throw DataError("judge '" + set.front().judge_id + "' supplied more than once");
    }
  }

  PanelResult result;
  result.qrels.set_source_tag(panel_id + "+" + policy_name(policy));
  for (std::size_t j = 0; j < judgment_sets.size(); ++j) {
    if (coverage[j] != by_pair.size()) {
      const std::string who =
          judgment_sets[j].empty() ? "#" + std::to_string(j) : judgment_sets[j].front().judge_id;
      const std::string message = "judge '" + who + "' covers " + std::to_string(coverage[j]) +
                                  " of " + std::to_string(by_pair.size()) + " pairs";
      if (options.strict_coverage) throw DataError(message);
      result.warnings.push_back(message);
    }
  }

  result.labels.reserve(by_pair.size());
  std::vector<int> labels;
  for (const auto& [key, votes] : by_pair) {
    labels.clear();
    AggregatedLabel agg;
    agg.query_id = key.first;
    agg.doc_id = key.second;
    agg.panel_size = judgment_sets.size();
    for (const auto& [judge_id, label] : votes) {
      labels.push_back(label);
      agg.per_judge.emplace(judge_id, label);
    }
    const Vote v = aggregate(labels, policy, pair_draw(policy.rng_seed, key.first, key.second));
    agg.final_label = v.label;
    agg.fractional_score = v.fractional;
    agg.tie_occurred = v.tie;
    result.qrels.insert(key.first, key.second, corpus::RelevanceLabel(v.label));
    result.labels.push_back(std::move(agg));
  }
  return result;
}

std::string to_jsonl(const std::vector<AggregatedLabel>& labels) {
  std::string out;
  for (const auto& a : labels) {
    json line = {{"query_id", a.query_id},
                 {"doc_id", a.doc_id},
                 {"final_label", a.final_label},
                 {"fractional_score", a.fractional_score},
                 {"per_judge", a.per_judge},
                 {"tie_occurred", a.tie_occurred},
                 {"coverage", a.panel_size == 0 ? 0.0
                                                : static_cast<double>(a.per_judge.size()) /
                                                      static_cast<double>(a.panel_size)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

BlendRun blend_run(const Panel& panel, const AggregationPolicy& policy,
                   const judge::PairList& pairs, provider::ResponseCache* cache,
                   const judge::JudgeOptions& options, const std::string& out_dir,
                   const judge::ProgressFn& progress) {
  namespace fs = std::filesystem;
  validate(panel);
  BlendRun run;
  std::vector<std::vector<judge::JudgmentRecord>> sets;
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const std::size_t total = pairs.size() * panel.judges.size();
  for (std::size_t k = 0; k < panel.judges.size(); ++k) {
    const auto& cfg = panel.judges[k];
    auto backend = provider::make_backend(cfg.endpoint);
    judge::Judge j(cfg, *backend, cache, options);
    judge::ProgressFn step;
    if (progress) {
      step = [&, offset = k * pairs.size()](std::size_t done, std::size_t) {
        progress(offset + done, total);
      };
    }
    auto judged = judge::run_judge(j, pairs, step);
    if (!out_dir.empty()) {
      const std::string path = (fs::path(out_dir) / (cfg.judge_id + ".judgments.jsonl")).string();
      corpus::write_file(path, judge::to_jsonl(judged.records));
      run.files.judgment_files.push_back(path);
    }
    run.judge_summaries.push_back(judged.summary);
    sets.push_back(std::move(judged.records));
  }
  run.result = aggregate_panel(sets, policy, panel.panel_id);
  if (!out_dir.empty()) {
    const std::string stem = panel.panel_id + "." + policy_name(policy);
    run.files.qrels_file = (fs::path(out_dir) / (stem + ".qrels")).string();
    run.files.sidecar_file = (fs::path(out_dir) / (stem + ".agg.jsonl")).string();
    corpus::write_file(run.files.qrels_file, corpus::write_qrels(run.result.qrels));
    corpus::write_file(run.files.sidecar_file, to_jsonl(run.result.labels));
  }
  return run;
}

}  // namespace judgeblender::blender
