// judgeblender command line. Talks to the library through the C API only.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "judgeblender/judgeblender.h"

namespace {

struct CString {
  char* p = nullptr;
  ~CString() { jb_string_free(p); }
  char** out() { return &p; }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};

using QrelsHandle = Handle<jb_qrels, jb_qrels_free>;
using RunsHandle = Handle<jb_runs, jb_runs_free>;
using ConfigHandle = Handle<jb_config, jb_config_free>;

struct Failure {
  jb_status status;
};

int exit_code(jb_status s) {
  switch (s) {
    case JB_OK: return 0;
    case JB_ERR_USAGE: return 1;
    case JB_ERR_PROVIDER: return 3;
    default: return 2;
  }
}

void check(jb_status s) {
  if (s != JB_OK) {
    std::cerr << "error (" << jb_status_name(s) << "): " << jb_last_error() << "\n";
    throw Failure{s};
  }
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error (io): cannot write '" << path << "'\n";
    throw Failure{JB_ERR_IO};
  }
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Echoes the "warnings" array of a JSON document to stderr.
void print_warnings(const std::string& json) {
  const auto at = json.find("\"warnings\"");
  if (at == std::string::npos) return;
  const auto open = json.find('[', at);
  const auto close = json.find(']', open);
  if (open == std::string::npos || close == std::string::npos) return;
  std::size_t pos = open;
  while (true) {
    const auto q1 = json.find('"', pos + 1);
    if (q1 == std::string::npos || q1 > close) break;
    auto q2 = q1 + 1;
    while (q2 < close && (json[q2] != '"' || json[q2 - 1] == '\\')) ++q2;
    std::cerr << "warning: " << json.substr(q1 + 1, q2 - q1 - 1) << "\n";
    pos = q2;
  }
}

QrelsHandle load_qrels(const std::string& path) {
  QrelsHandle h;
  check(jb_qrels_load(path.c_str(), &h.p));
  return h;
}

void progress_bar(size_t done, size_t total, void*) {
  if (done == total || done % 100 == 0) {
    std::fprintf(stderr, "\rjudged %zu/%zu", done, total);
    if (done == total) std::fputc('\n', stderr);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM relevance judgment ensembles and their meta-evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(jb_version()));

  std::string config_path, qrels_path, generated_path, runs_dir, out_path, queries_path,
      passages_path, categories_path, judge_id, policy, panel_id = "panel", metric = "ndcg@10",
      alpha_level = "ordinal", name;
  std::vector<std::string> judgment_files;
  std::optional<std::uint64_t> seed;
  bool strict = false, gold_hint = false, as_json = false, progress = false;
  int parallel = 0;
  jb_synth_options synth;
  jb_synth_options_init(&synth);

  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  stats->add_option("--qrels", qrels_path, "Qrels file")->required();
  stats->add_option("--queries", queries_path, "Queries TSV");
  stats->add_option("--passages", passages_path, "Passages TSV");
  stats->add_flag("--json", as_json, "Print JSON");

  auto* judge = app.add_subcommand("judge", "Run one judge over the qrels pairs");
  judge->add_option("--config", config_path, "Pipeline config (JSON)")->required();
  judge->add_option("--judge", judge_id, "Judge id from the config")->required();
  judge->add_option("--qrels", qrels_path, "Pairs to judge (qrels format)")->required();
  judge->add_option("--queries", queries_path, "Queries TSV")->required();
  judge->add_option("--passages", passages_path, "Passages TSV")->required();
  judge->add_option("--out", out_path, "Judgment JSONL output")->required();
  judge->add_option("--seed", seed, "Override the config seed");
  judge->add_option("--parallel", parallel, "Concurrent requests (0: endpoint setting)");
  judge->add_flag("--strict", strict, "Abort on provider failure");
  judge->add_flag("--gold-hint", gold_hint, "Embed qrels labels for copy-gold mocks");
  judge->add_flag("--progress", progress, "Report progress on stderr");

  auto* blend = app.add_subcommand("blend", "Aggregate judges into qrels");
  blend->add_option("--judgments", judgment_files, "Judgment JSONL files to aggregate");
  blend->add_option("--config", config_path, "Run the config's panel instead");
  blend->add_option("--qrels", qrels_path, "Pairs to judge (with --config)");
  blend->add_option("--queries", queries_path, "Queries TSV (with --config)");
  blend->add_option("--passages", passages_path, "Passages TSV (with --config)");
  blend->add_option("--policy", policy, "mv-rnd, mv-max, mv-min, mv-avg or av");
  blend->add_option("--panel-id", panel_id, "Panel name (with --judgments)");
  blend->add_option("--out", out_path, "Output directory")->required();
  blend->add_option("--seed", seed, "Seed for MV(Rnd) and mocks");
  blend->add_option("--parallel", parallel, "Concurrent requests (0: endpoint setting)");
  blend->add_flag("--strict", strict, "Abort on provider failure or uneven coverage");
  blend->add_flag("--gold-hint", gold_hint, "Embed qrels labels for copy-gold mocks");
  blend->add_flag("--progress", progress, "Report progress on stderr");

  auto* agreement = app.add_subcommand("agreement", "Agreement of generated with gold labels");
  agreement->add_option("--qrels", qrels_path, "Gold qrels")->required();
  agreement->add_option("--generated", generated_path, "Generated qrels")->required();
  agreement->add_option("--alpha-level", alpha_level, "nominal, ordinal or interval");
  agreement->add_option("--out", out_path, "Directory for agreement.json and CSV matrices");
  agreement->add_flag("--json", as_json, "Print JSON");

  auto* rank = app.add_subcommand("rank-eval", "System ranking correlation and bias scatter");
  rank->add_option("--qrels", qrels_path, "Gold qrels")->required();
  rank->add_option("--generated", generated_path, "Generated qrels")->required();
  rank->add_option("--runs", runs_dir, "Directory of run files")->required();
  rank->add_option("--metric", metric, "ndcg@10 or map");
  rank->add_option("--categories", categories_path, "run_tag,category CSV");
  rank->add_option("--out", out_path, "Directory for the JSON report and scatter CSV");
  rank->add_flag("--strict", strict, "Fail on run queries missing from the qrels");

  auto* report = app.add_subcommand("report", "One correlation table row");
  report->add_option("--qrels", qrels_path, "Gold qrels")->required();
  report->add_option("--generated", generated_path, "Generated qrels")->required();
  report->add_option("--runs", runs_dir, "Directory of run files");
  report->add_option("--name", name, "Row label");
  report->add_option("--alpha-level", alpha_level, "nominal, ordinal or interval");
  report->add_option("--out", out_path, "JSON output file");
  report->add_flag("--strict", strict, "Fail on run queries missing from the qrels");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus with runs");
  synth_cmd->add_option("--out", out_path, "Output directory")->required();
  synth_cmd->add_option("--queries", synth.n_queries, "Number of queries");
  synth_cmd->add_option("--docs-per-query", synth.docs_per_query, "Judged passages per query");
  synth_cmd->add_option("--runs", synth.n_runs, "Number of runs");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    jb_judge_options jopts;
    jb_judge_options_init(&jopts);
    jopts.pairs_qrels = qrels_path.c_str();
    jopts.queries = queries_path.c_str();
    jopts.passages = passages_path.c_str();
    jopts.strict = strict;
    jopts.gold_hint = gold_hint;
    jopts.max_parallel = parallel;
    const std::uint64_t* seed_ptr = seed ? &*seed : nullptr;

    if (*stats) {
      CString json, text;
      check(jb_stats(qrels_path.c_str(), queries_path.empty() ? nullptr : queries_path.c_str(),
                     passages_path.empty() ? nullptr : passages_path.c_str(), json.out(),
                     text.out()));
      std::cout << (as_json ? json.str() : text.str());
    } else if (*judge) {
      ConfigHandle cfg;
      check(jb_config_load(config_path.c_str(), seed_ptr, &cfg.p));
      if (progress) jopts.progress = progress_bar;
      CString summary;
      check(jb_judge(cfg.p, judge_id.c_str(), &jopts, out_path.c_str(), summary.out()));
      std::cout << summary.str();
    } else if (*blend) {
      CString summary;
      if (!config_path.empty()) {
        if (!judgment_files.empty()) {
          std::cerr << "error (usage): give either --config or --judgments\n";
          return 1;
        }
        if (qrels_path.empty() || queries_path.empty() || passages_path.empty()) {
          std::cerr << "error (usage): --config needs --qrels, --queries and --passages\n";
          return 1;
        }
        ConfigHandle cfg;
        check(jb_config_load(config_path.c_str(), seed_ptr, &cfg.p));
        if (progress) jopts.progress = progress_bar;
        check(jb_blend_panel(cfg.p, policy.empty() ? nullptr : policy.c_str(), &jopts,
                             out_path.c_str(), summary.out()));
      } else {
        if (judgment_files.empty()) {
          std::cerr << "error (usage): give --judgments files or a --config panel\n";
          return 1;
        }
        std::vector<const char*> paths;
        for (const auto& f : judgment_files) paths.push_back(f.c_str());
        check(jb_blend_files(paths.data(), paths.size(),
                             policy.empty() ? "mv-avg" : policy.c_str(), seed.value_or(0),
                             panel_id.c_str(), strict, out_path.c_str(), summary.out()));
      }
      print_warnings(summary.str());
      std::cout << summary.str();
    } else if (*agreement) {
      auto gold = load_qrels(qrels_path);
      auto gen = load_qrels(generated_path);
      CString json, text, matrix, binary;
      check(jb_agreement(gold.p, gen.p, alpha_level.c_str(), json.out(), text.out(), matrix.out(),
                         binary.out()));
      if (!out_path.empty()) {
        write_text(join(out_path, "agreement.json"), json.str());
        write_text(join(out_path, "confusion.csv"), matrix.str());
        write_text(join(out_path, "binary.csv"), binary.str());
      }
      std::cout << (as_json ? json.str() : text.str());
    } else if (*rank) {
      auto gold = load_qrels(qrels_path);
      auto gen = load_qrels(generated_path);
      RunsHandle runs;
      check(jb_runs_load_dir(runs_dir.c_str(), &runs.p));
      CString json, scatter;
      check(jb_rank_eval(gold.p, gen.p, runs.p, metric.c_str(),
                         categories_path.empty() ? nullptr : categories_path.c_str(), strict,
                         json.out(), scatter.out()));
      print_warnings(json.str());
      if (!out_path.empty()) {
        write_text(join(out_path, "rank_eval." + metric + ".json"), json.str());
        write_text(join(out_path, "scatter." + metric + ".csv"), scatter.str());
      }
      std::cout << json.str();
    } else if (*report) {
      auto gold = load_qrels(qrels_path);
      auto gen = load_qrels(generated_path);
      RunsHandle runs;
      if (!runs_dir.empty()) check(jb_runs_load_dir(runs_dir.c_str(), &runs.p));
      CString text, json;
      check(jb_report(name.empty() ? std::filesystem::path(generated_path).stem().c_str()
                                   : name.c_str(),
                      gold.p, gen.p, runs.p, alpha_level.c_str(), strict, text.out(), json.out()));
      print_warnings(json.str());
      if (!out_path.empty()) write_text(out_path, json.str());
      std::cout << text.str();
    } else if (*synth_cmd) {
      check(jb_synth(&synth, out_path.c_str()));
      std::cout << "wrote synthetic corpus to " << out_path << "\n";
    }
  } catch (const Failure& f) {
    return exit_code(f.status);
  }
  return 0;
}
