#include "judgeblender/judgeblender.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "judgeblender/blender.hpp"
#include "judgeblender/corpus_io.hpp"
#include "judgeblender/error.hpp"
#include "judgeblender/harness.hpp"
#include "judgeblender/judge.hpp"
#include "judgeblender/metrics.hpp"
#include "judgeblender/provider.hpp"
#include "json.hpp"

namespace jb = judgeblender;
using json = nlohmann::json;

struct jb_qrels {
  jb::corpus::QrelsSet value;
};

struct jb_runs {
  std::vector<jb::corpus::RunRanking> value;
};

struct jb_config {
  jb::harness::PipelineConfig value;
};

namespace {

thread_local std::string g_last_error;

jb_status status_of(jb::ErrorKind kind) {
  switch (kind) {
    case jb::ErrorKind::kUsage: return JB_ERR_USAGE;
    case jb::ErrorKind::kData: return JB_ERR_DATA;
    case jb::ErrorKind::kIo: return JB_ERR_IO;
    case jb::ErrorKind::kProvider: return JB_ERR_PROVIDER;
    case jb::ErrorKind::kCache: return JB_ERR_CACHE;
  }
  return JB_ERR_INTERNAL;
}

template <typename Fn>
jb_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return JB_OK;
  } catch (const jb::ProviderError& e) {
    g_last_error = e.what();
    for (const auto& cause : e.causes()) g_last_error += "\n  " + cause;
    return JB_ERR_PROVIDER;
  } catch (const jb::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return JB_ERR_IO;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return JB_ERR_DATA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return JB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return JB_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return JB_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw jb::ConfigError(std::string(what) + " must not be NULL");
}

void emit(char** out, const std::string& s) {
  if (out == nullptr) return;
  char* buf = static_cast<char*>(std::malloc(s.size() + 1));
  if (buf == nullptr) throw std::bad_alloc();
  std::memcpy(buf, s.data(), s.size());
  buf[s.size()] = '\0';
  *out = buf;
}

void clear_outputs(std::initializer_list<char**> outs) {
  for (char** o : outs) {
    if (o != nullptr) *o = nullptr;
  }
}

jb::metrics::AlphaLevel level_of(const char* name) {
  return name == nullptr ? jb::metrics::AlphaLevel::kOrdinal : jb::metrics::parse_alpha_level(name);
}

json judge_summary(const jb::judge::JudgeSummary& s) {
  return {{"pairs", s.pairs},
          {"clean", s.clean},
          {"lenient", s.lenient},
          {"defaulted", s.defaulted},
          {"provider_failures", s.provider_failures},
          {"truncated", s.truncated}};
}

struct LoadedPairs {
  jb::corpus::QrelsSet qrels;
  jb::judge::PairList pairs;
};

LoadedPairs load_pairs(const jb_judge_options& o) {
  require(o.pairs_qrels, "pairs qrels path");
  require(o.queries, "queries path");
  require(o.passages, "passages path");
  LoadedPairs out;
  out.qrels = jb::corpus::load_qrels(o.pairs_qrels);
  out.pairs = jb::judge::make_pairs(out.qrels, jb::corpus::load_queries(o.queries),
                                    jb::corpus::load_passages(o.passages));
  return out;
}

jb::judge::ProgressFn progress_fn(const jb_judge_options& options) {
  if (options.progress == nullptr) return {};
  return [&options](std::size_t done, std::size_t total) {
    options.progress(done, total, options.progress_user);
  };
}

jb::judge::JudgeOptions judge_options(const jb::harness::PipelineConfig& cfg,
                                      const jb_judge_options& o, const LoadedPairs& pairs) {
  jb::judge::JudgeOptions opts;
  opts.passage_budget = cfg.passage_budget;
  opts.fail_fast = o.strict != 0;
  opts.gold_hints = o.gold_hint != 0 ? &pairs.qrels : nullptr;
  opts.max_parallel = o.max_parallel;
  return opts;
}

std::unique_ptr<jb::provider::ResponseCache> open_cache(const jb::harness::PipelineConfig& cfg) {
  if (cfg.cache_path.empty()) return std::make_unique<jb::provider::ResponseCache>();
  return std::make_unique<jb::provider::ResponseCache>(cfg.cache_path);
}

json blend_json(const jb::blender::PanelResult& result, const std::string& panel_id,
                const jb::blender::AggregationPolicy& policy) {
  std::size_t ties = 0;
  for (const auto& l : result.labels) ties += l.tie_occurred ? 1 : 0;
  std::array<std::size_t, 4> hist{};
  for (const auto& [key, label] : result.qrels.entries()) ++hist[static_cast<std::size_t>(label.value())];
  return {{"panel", panel_id},
          {"policy", jb::blender::policy_name(policy)},
          {"pairs", result.labels.size()},
          {"ties", ties},
          {"label_histogram", hist},
          {"warnings", result.warnings}};
}

}  // namespace

extern "C" {

const char* jb_version(void) { return "0.1.0"; }

const char* jb_status_name(jb_status status) {
  switch (status) {
    case JB_OK: return "ok";
    case JB_ERR_USAGE: return "usage";
    case JB_ERR_DATA: return "data";
    case JB_ERR_PROVIDER: return "provider";
    case JB_ERR_IO: return "io";
    case JB_ERR_CACHE: return "cache";
    case JB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* jb_last_error(void) { return g_last_error.c_str(); }

void jb_string_free(char* s) { std::free(s); }

jb_status jb_qrels_load(const char* path, jb_qrels** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto q = std::make_unique<jb_qrels>();
    q->value = jb::corpus::load_qrels(path);
    *out = q.release();
  });
}

void jb_qrels_free(jb_qrels* qrels) { delete qrels; }

size_t jb_qrels_size(const jb_qrels* qrels) { return qrels ? qrels->value.size() : 0; }

jb_status jb_runs_load_dir(const char* dir, jb_runs** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = nullptr;
    auto r = std::make_unique<jb_runs>();
    r->value = jb::corpus::load_run_dir(dir);
    if (r->value.empty()) throw jb::DataError(std::string("no run files in '") + dir + "'");
    *out = r.release();
  });
}

void jb_runs_free(jb_runs* runs) { delete runs; }

size_t jb_runs_count(const jb_runs* runs) { return runs ? runs->value.size() : 0; }

jb_status jb_config_load(const char* path, const uint64_t* seed_override, jb_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto c = std::make_unique<jb_config>();
    c->value = jb::harness::load_config(
        path, seed_override ? std::optional<std::uint64_t>(*seed_override) : std::nullopt);
    *out = c.release();
  });
}

void jb_config_free(jb_config* config) { delete config; }

jb_status jb_stats(const char* qrels_path, const char* queries_path, const char* passages_path,
                   char** json_out, char** text_out) {
  clear_outputs({json_out, text_out});
  return guarded([&] {
    require(qrels_path, "qrels path");
    const auto qrels = jb::corpus::load_qrels(qrels_path);
    const auto queries =
        queries_path ? jb::corpus::load_queries(queries_path) : std::vector<jb::corpus::Query>{};
    const auto passages = passages_path ? jb::corpus::load_passages(passages_path)
                                        : std::vector<jb::corpus::Passage>{};
    const auto s = jb::corpus::dataset_stats(qrels, queries, passages);
    json doc = {{"queries", s.n_queries},
                {"passages", s.n_passages},
                {"qrels", s.n_qrels},
                {"label_histogram", s.label_histogram}};
    std::string text = "queries   " + std::to_string(s.n_queries) + "\npassages  " +
                       std::to_string(s.n_passages) + "\nqrels     " + std::to_string(s.n_qrels) +
                       "\n";
    for (std::size_t l = 0; l < 4; ++l) {
      text += "label " + std::to_string(l) + "   " + std::to_string(s.label_histogram[l]) + "\n";
    }
    emit(json_out, doc.dump(2) + "\n");
    emit(text_out, text);
  });
}

void jb_judge_options_init(jb_judge_options* options) {
  if (options != nullptr) *options = jb_judge_options{};
}

jb_status jb_judge(const jb_config* config, const char* judge_id, const jb_judge_options* options,
                   const char* out_path, char** summary_json) {
  clear_outputs({summary_json});
  return guarded([&] {
    require(config, "config");
    require(judge_id, "judge id");
    require(options, "options");
    require(out_path, "output path");
    const auto& cfg = config->value;
    const auto& jc = jb::harness::find_judge(cfg, judge_id);
    const auto pairs = load_pairs(*options);
    auto backend = jb::provider::make_backend(jc.endpoint);
    auto cache = open_cache(cfg);
    jb::judge::Judge judge(jc, *backend, cache.get(), judge_options(cfg, *options, pairs));
    const auto progress = progress_fn(*options);
    const auto run = jb::judge::run_judge(judge, pairs.pairs, progress);
    const auto parent = std::filesystem::path(out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    jb::corpus::write_file(out_path, jb::judge::to_jsonl(run.records));
    json doc = judge_summary(run.summary);
    doc["judge_id"] = jc.judge_id;
    doc["output"] = out_path;
    emit(summary_json, doc.dump(2) + "\n");
  });
}

jb_status jb_blend_panel(const jb_config* config, const char* policy,
                         const jb_judge_options* options, const char* out_dir,
                         char** summary_json) {
  clear_outputs({summary_json});
  return guarded([&] {
    require(config, "config");
    require(options, "options");
    require(out_dir, "output directory");
    const auto& cfg = config->value;
    if (cfg.panel.judges.empty()) throw jb::ConfigError("the config defines no panel");
    const auto pol = policy ? jb::blender::parse_policy(policy, cfg.seed) : cfg.policy;
    const auto pairs = load_pairs(*options);
    auto cache = open_cache(cfg);
    const auto run = jb::blender::blend_run(cfg.panel, pol, pairs.pairs, cache.get(),
                                            judge_options(cfg, *options, pairs), out_dir,
                                            progress_fn(*options));
    json doc = blend_json(run.result, cfg.panel.panel_id, pol);
    json judges = json::array();
    for (std::size_t i = 0; i < run.judge_summaries.size(); ++i) {
      json s = judge_summary(run.judge_summaries[i]);
      s["judge_id"] = cfg.panel.judges[i].judge_id;
      judges.push_back(s);
    }
    doc["judges"] = judges;
    doc["qrels"] = run.files.qrels_file;
    doc["sidecar"] = run.files.sidecar_file;
    emit(summary_json, doc.dump(2) + "\n");
  });
}

jb_status jb_blend_files(const char* const* judgment_paths, size_t n_paths, const char* policy,
                         uint64_t seed, const char* panel_id, int strict, const char* out_dir,
                         char** summary_json) {
  clear_outputs({summary_json});
  return guarded([&] {
    if (n_paths == 0) throw jb::ConfigError("no judgment files given");
    require(judgment_paths, "judgment paths");
    require(policy, "policy");
    require(panel_id, "panel id");
    require(out_dir, "output directory");
    const auto pol = jb::blender::parse_policy(policy, seed);
    std::vector<std::vector<jb::judge::JudgmentRecord>> sets;
    for (size_t i = 0; i < n_paths; ++i) {
      require(judgment_paths[i], "judgment path");
      sets.push_back(jb::judge::load_judgments(judgment_paths[i]));
    }
    jb::blender::AggregateOptions agg;
    agg.strict_coverage = strict != 0;
    const auto result = jb::blender::aggregate_panel(sets, pol, panel_id, agg);
    std::filesystem::create_directories(out_dir);
    const std::string stem = std::string(panel_id) + "." + jb::blender::policy_name(pol);
    const auto dir = std::filesystem::path(out_dir);
    const auto qrels_file = (dir / (stem + ".qrels")).string();
    const auto sidecar = (dir / (stem + ".agg.jsonl")).string();
    jb::corpus::write_file(qrels_file, jb::corpus::write_qrels(result.qrels));
    jb::corpus::write_file(sidecar, jb::blender::to_jsonl(result.labels));
    json doc = blend_json(result, panel_id, pol);
    doc["qrels"] = qrels_file;
    doc["sidecar"] = sidecar;
    emit(summary_json, doc.dump(2) + "\n");
  });
}

jb_status jb_agreement(const jb_qrels* gold, const jb_qrels* generated, const char* alpha_level,
                       char** json_out, char** text_out, char** matrix_csv_out,
                       char** binary_csv_out) {
  clear_outputs({json_out, text_out, matrix_csv_out, binary_csv_out});
  return guarded([&] {
    require(gold, "gold qrels");
    require(generated, "generated qrels");
    const auto report =
        jb::metrics::agreement_report(gold->value, generated->value, level_of(alpha_level));
    emit(json_out, jb::metrics::to_json(report));
    emit(text_out, jb::metrics::to_text(report));
    emit(matrix_csv_out, jb::metrics::to_csv(report.matrix));
    emit(binary_csv_out, jb::metrics::to_csv(report.binary));
  });
}

jb_status jb_rank_eval(const jb_qrels* gold, const jb_qrels* generated, const jb_runs* runs,
                       const char* metric, const char* categories_path, int strict,
                       char** json_out, char** scatter_csv_out) {
  clear_outputs({json_out, scatter_csv_out});
  return guarded([&] {
    require(gold, "gold qrels");
    require(generated, "generated qrels");
    require(runs, "runs");
    const auto spec = jb::harness::parse_metric(metric ? metric : "ndcg@10");
    const auto categories = categories_path ? jb::harness::load_categories(categories_path)
                                            : jb::harness::CategoryMap{};
    jb::harness::EvalOptions opts;
    opts.strict = strict != 0;
    const auto eval =
        jb::harness::rank_eval(gold->value, generated->value, runs->value, spec, categories, opts);
    emit(json_out, jb::harness::to_json(eval));
    emit(scatter_csv_out, jb::harness::scatter_csv(eval.bias));
  });
}

jb_status jb_report(const char* name, const jb_qrels* gold, const jb_qrels* generated,
                    const jb_runs* runs, const char* alpha_level, int strict, char** text_out,
                    char** json_out) {
  clear_outputs({text_out, json_out});
  return guarded([&] {
    require(gold, "gold qrels");
    require(generated, "generated qrels");
    jb::harness::EvalOptions opts;
    opts.strict = strict != 0;
    static const std::vector<jb::corpus::RunRanking> kNoRuns;
    const auto row = jb::harness::report_row(name ? name : generated->value.source_tag(),
                                             gold->value, generated->value,
                                             runs ? runs->value : kNoRuns, level_of(alpha_level),
                                             opts);
    emit(text_out, jb::harness::to_text(row));
    emit(json_out, jb::harness::to_json(row));
  });
}

jb_status jb_mock_complete(uint64_t seed, const char* profile, int fixed_label,
                           double malformed_probability, const char* prompt, char** text_out) {
  clear_outputs({text_out});
  return guarded([&] {
    require(profile, "profile");
    require(prompt, "prompt");
    require(text_out, "text_out");
    using Kind = jb::provider::MockProfile::Kind;
    jb::provider::MockProfile p;
    const std::string name(profile);
    if (name == "fixed") {
      p.kind = Kind::kFixed;
    } else if (name == "digest") {
      p.kind = Kind::kDigest;
    } else if (name == "copy-gold") {
      p.kind = Kind::kCopyGold;
    } else if (name == "malformed") {
      p.kind = Kind::kMalformed;
    } else {
      throw jb::ConfigError("unknown mock profile '" + name + "'");
    }
    p.fixed_label = fixed_label;
    p.malformed_probability = malformed_probability;
    emit(text_out, jb::provider::mock_complete(seed, p, prompt).text);
  });
}

void jb_synth_options_init(jb_synth_options* options) {
  if (options == nullptr) return;
  const jb::harness::SynthOptions d;
  options->n_queries = d.n_queries;
  options->docs_per_query = d.docs_per_query;
  options->n_runs = d.n_runs;
  options->seed = d.seed;
}

jb_status jb_synth(const jb_synth_options* options, const char* out_dir) {
  return guarded([&] {
    require(options, "options");
    require(out_dir, "output directory");
    jb::harness::SynthOptions o;
    o.n_queries = options->n_queries;
    o.docs_per_query = options->docs_per_query;
    o.n_runs = options->n_runs;
    o.seed = options->seed;
    jb::harness::write_synth(jb::harness::synthesize(o), out_dir);
  });
}

}  // extern "C"
