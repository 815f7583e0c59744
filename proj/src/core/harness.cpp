#include "judgeblender/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "judgeblender/error.hpp"
#include "json.hpp"

namespace judgeblender::harness {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string stat_or_dash(const std::optional<double>& v) {
  return v ? metrics::format_stat(*v) : std::string("-");
}

std::string pad_id(const char* prefix, std::size_t i, std::size_t total) {
  const std::size_t width = std::to_string(total).size();
  std::string digits = std::to_string(i);
  return prefix + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

provider::MockProfile parse_mock(const json& m, const std::string& where) {
  provider::MockProfile profile;
  const auto name = get_or<std::string>(m, "profile", "digest", where);
  if (name == "fixed") {
    profile.kind = provider::MockProfile::Kind::kFixed;
  } else if (name == "digest") {
    profile.kind = provider::MockProfile::Kind::kDigest;
  } else if (name == "copy-gold" || name == "copy_gold") {
    profile.kind = provider::MockProfile::Kind::kCopyGold;
  } else if (name == "malformed") {
    profile.kind = provider::MockProfile::Kind::kMalformed;
  } else {
    throw ConfigError(where + ": unknown mock profile '" + name +
                      "' (expected fixed, digest, copy-gold or malformed)");
  }
  profile.fixed_label = get_or<int>(m, "label", 0, where);
  profile.malformed_probability = get_or<double>(m, "probability", 1.0, where);
  return profile;
}

provider::JudgeEndpoint parse_endpoint(const std::string& id, const json& e, std::uint64_t seed) {
  const std::string where = "endpoint '" + id + "'";
  if (!e.is_object()) throw ConfigError(where + " must be an object");
  provider::JudgeEndpoint ep;
  ep.endpoint_id = id;
  const auto backend = get_or<std::string>(e, "backend", "http", where);
  if (backend == "http") {
    ep.kind = provider::BackendKind::kHttp;
  } else if (backend == "mock") {
    ep.kind = provider::BackendKind::kMock;
  } else {
    throw ConfigError(where + ": backend must be 'http' or 'mock'");
  }
  ep.base_url = get_or<std::string>(e, "base_url", "", where);
  ep.path = get_or<std::string>(e, "path", ep.path, where);
  ep.model_name = get_or<std::string>(e, "model", ep.kind == provider::BackendKind::kMock ? id : "",
                                      where);
  ep.decoding.temperature = get_or<double>(e, "temperature", ep.decoding.temperature, where);
  ep.decoding.max_tokens = get_or<int>(e, "max_tokens", ep.decoding.max_tokens, where);
  ep.auth_token_env = get_or<std::string>(e, "auth_env", "", where);
  ep.max_parallel = get_or<int>(e, "max_parallel", ep.max_parallel, where);
  ep.timeout = std::chrono::milliseconds(
      get_or<std::int64_t>(e, "timeout_ms", ep.timeout.count(), where));
  if (auto it = e.find("retry"); it != e.end()) {
    auto& r = ep.retry;
    r.max_attempts = get_or<int>(*it, "max_attempts", r.max_attempts, where);
    r.base_delay = std::chrono::milliseconds(
        get_or<std::int64_t>(*it, "base_delay_ms", r.base_delay.count(), where));
    r.multiplier = get_or<double>(*it, "multiplier", r.multiplier, where);
    r.jitter = get_or<double>(*it, "jitter", r.jitter, where);
    r.max_delay = std::chrono::milliseconds(
        get_or<std::int64_t>(*it, "max_delay_ms", r.max_delay.count(), where));
  }
  if (ep.kind == provider::BackendKind::kMock) {
    const json m = e.value("mock", json::object());
    ep.mock = parse_mock(m, where);
    ep.mock_seed = mix_seed(seed, get_or<std::uint64_t>(m, "seed", 0, where));
  }
  provider::validate(ep);
  return ep;
}

}  // namespace

MetricSpec parse_metric(std::string_view name) {
  const std::string n = lower(trim(name));
  if (n == "map") return {Metric::kMap, 0};
  if (n == "ndcg") return {Metric::kNdcg, 10};
  if (n.rfind("ndcg@", 0) == 0) {
    int k = 0;
    const char* first = n.data() + 5;
    const char* last = n.data() + n.size();
    auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec == std::errc() && ptr == last && k >= 1) return {Metric::kNdcg, k};
  }
  throw ConfigError("unknown metric '" + std::string(name) + "' (expected ndcg@<k> or map)");
}

std::string metric_name(const MetricSpec& spec) {
  return spec.metric == Metric::kMap ? "map" : "ndcg@" + std::to_string(spec.k);
}

RunScores evaluate_runs(const std::vector<corpus::RunRanking>& runs, const corpus::QrelsSet& qrels,
                        const MetricSpec& spec, const EvalOptions& options) {
  if (runs.empty()) throw DataError("no runs to evaluate");
  if (qrels.empty()) throw DataError("qrels are empty");
  std::map<std::string, std::map<std::string, int>> judged;
  for (const auto& [key, label] : qrels.entries()) judged[key.first][key.second] = label.value();

  RunScores out;
  for (const auto& run : runs) {
    const std::string& tag = run.run_tag();
    if (out.scores.contains(tag)) throw DataError("run tag '" + tag + "' appears twice");
    std::size_t overlap = 0;
    std::vector<std::string> extra;
    for (const auto& [qid, ranking] : run.rankings()) {
      if (judged.contains(qid)) {
        ++overlap;
      } else {
        extra.push_back(qid);
      }
    }
    if (overlap == 0) throw DataError("run '" + tag + "' shares no query with the qrels");
    if (!extra.empty()) {
      std::string msg = "run '" + tag + "': " + std::to_string(extra.size()) +
                        " queries without judgments are ignored (";
      for (std::size_t i = 0; i < extra.size() && i < 5; ++i) msg += (i ? ", " : "") + extra[i];
      msg += extra.size() > 5 ? ", ...)" : ")";
      if (options.strict) throw DataError(msg);
      out.warnings.push_back(msg);
    }
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& [qid, labels] : judged) {
      const auto docs = run.doc_ids(qid);
      if (spec.metric == Metric::kNdcg) {
        sum += metrics::ndcg_at_k(docs, labels, spec.k);
        ++counted;
      } else if (auto ap = metrics::average_precision(docs, labels)) {
        sum += *ap;
        ++counted;
      }
    }
    if (counted == 0) {
      out.warnings.push_back("run '" + tag + "': no query has a relevant document; score is 0");
    }
    out.scores[tag] = counted > 0 ? sum / static_cast<double>(counted) : 0.0;
  }
  return out;
}

RankCorrelation system_ranking_correlation(const corpus::QrelsSet& gold,
                                           const corpus::QrelsSet& generated,
                                           const std::vector<corpus::RunRanking>& runs,
                                           const MetricSpec& spec, const EvalOptions& options) {
  if (runs.size() < 2) throw DataError("ranking correlation needs at least two runs");
  RunScores g = evaluate_runs(runs, gold, spec, options);
  RunScores p = evaluate_runs(runs, generated, spec, options);
  RankCorrelation out;
  out.metric = spec;
  std::vector<double> x, y;
  for (const auto& [tag, value] : g.scores) {
    const double gen = p.scores.at(tag);
    out.systems.push_back({tag, value, gen});
    x.push_back(value);
    y.push_back(gen);
  }
  const auto tau = metrics::kendall_tau(x, y);
  const auto rho = metrics::spearman_rho(x, y);
  if (!tau || !rho) {
    const bool gold_constant = std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end();
    throw DataError(std::string("system scores are constant under the ") +
                    (gold_constant ? "gold" : "generated") + " qrels; rank correlation is undefined");
  }
  out.tau = *tau;
  out.rho = *rho;
  for (auto& w : g.warnings) out.warnings.push_back("gold: " + w);
  for (auto& w : p.warnings) out.warnings.push_back("generated: " + w);
  return out;
}

std::string_view category_name(BiasCategory category) {
  switch (category) {
    case BiasCategory::kGpt: return "GPT";
    case BiasCategory::kT5: return "T5";
    case BiasCategory::kGptT5: return "GPT+T5";
    case BiasCategory::kOther: return "other";
  }
  return "other";
}

BiasCategory parse_category(std::string_view name) {
  const std::string n = lower(trim(name));
  if (n == "gpt") return BiasCategory::kGpt;
  if (n == "t5") return BiasCategory::kT5;
  if (n == "gpt+t5") return BiasCategory::kGptT5;
  if (n == "other") return BiasCategory::kOther;
  throw DataError("unknown category '" + std::string(name) + "' (expected GPT, T5, GPT+T5, other)");
}

CategoryMap parse_categories(std::string_view csv, const std::string& source_name) {
  CategoryMap out;
  std::size_t line_no = 0;
  bool first = true;
  while (!csv.empty()) {
    const auto nl = csv.find('\n');
    std::string_view line = csv.substr(0, nl);
    csv = nl == std::string_view::npos ? std::string_view() : csv.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw ParseError(source_name, line_no, "expected 'run_tag,category'");
    }
    const auto tag = trim(line.substr(0, comma));
    const auto cat = trim(line.substr(comma + 1));
    if (first && lower(cat) == "category") {
      first = false;
      continue;
    }
    first = false;
    if (tag.empty()) throw ParseError(source_name, line_no, "empty run tag");
    BiasCategory category;
    try {
      category = parse_category(cat);
    } catch (const DataError& e) {
      throw ParseError(source_name, line_no, e.what());
    }
    if (!out.emplace(std::string(tag), category).second) {
      throw ParseError(source_name, line_no, "run '" + std::string(tag) + "' listed twice");
    }
  }
  return out;
}

CategoryMap load_categories(const std::string& path) {
  return parse_categories(corpus::read_file(path), path);
}

BiasAnalysis bias_scatter(const std::map<std::string, double>& gold_scores,
                          const std::map<std::string, double>& generated_scores,
                          const CategoryMap& categories) {
  BiasAnalysis out;
  for (const auto& [tag, v] : generated_scores) {
    if (!gold_scores.contains(tag)) {
      throw DataError("run '" + tag + "' is scored under the generated qrels only");
    }
  }
  std::map<BiasCategory, double> sums;
  for (auto c : kAllCategories) out.counts[c] = 0;
  for (const auto& [tag, x] : gold_scores) {
    auto it = generated_scores.find(tag);
    if (it == generated_scores.end()) {
      throw DataError("run '" + tag + "' is scored under the gold qrels only");
    }
    BiasCategory category = BiasCategory::kOther;
    if (auto c = categories.find(tag); c != categories.end()) {
      category = c->second;
    } else {
      out.warnings.push_back("run '" + tag + "' has no category; using other");
    }
    out.points.push_back({tag, x, it->second, category});
    ++out.counts[category];
    sums[category] += it->second - x;
  }
  for (auto c : kAllCategories) {
    const auto n = out.counts[c];
    out.residual_mean[c] =
        n > 0 ? std::optional<double>(sums[c] / static_cast<double>(n)) : std::nullopt;
  }
  return out;
}

std::string scatter_csv(const BiasAnalysis& analysis) {
  std::string out = "run_tag,category,gold,generated\n";
  for (const auto& p : analysis.points) {
    out += p.run_tag + "," + std::string(category_name(p.category)) + "," + fixed6(p.x) + "," +
           fixed6(p.y) + "\n";
  }
  return out;
}

RankEval rank_eval(const corpus::QrelsSet& gold, const corpus::QrelsSet& generated,
                   const std::vector<corpus::RunRanking>& runs, const MetricSpec& spec,
                   const CategoryMap& categories, const EvalOptions& options) {
  RankEval out;
  out.correlation = system_ranking_correlation(gold, generated, runs, spec, options);
  std::map<std::string, double> x, y;
  for (const auto& s : out.correlation.systems) {
    x[s.run_tag] = s.value_under_gold;
    y[s.run_tag] = s.value_under_generated;
  }
  out.bias = bias_scatter(x, y, categories);
  return out;
}

std::string to_json(const RankEval& eval, int indent) {
  json systems = json::array();
  for (std::size_t i = 0; i < eval.correlation.systems.size(); ++i) {
    const auto& s = eval.correlation.systems[i];
    systems.push_back({{"run_tag", s.run_tag},
                       {"gold", s.value_under_gold},
                       {"generated", s.value_under_generated},
                       {"category", category_name(eval.bias.points.at(i).category)}});
  }
  json residuals = json::object();
  json counts = json::object();
  for (auto c : kAllCategories) {
    const std::string name(category_name(c));
    residuals[name] = optional_json(eval.bias.residual_mean.at(c));
    counts[name] = eval.bias.counts.at(c);
  }
  json warnings = eval.correlation.warnings;
  for (const auto& w : eval.bias.warnings) warnings.push_back(w);
  json doc = {{"metric", metric_name(eval.correlation.metric)},
              {"n_systems", eval.correlation.systems.size()},
              {"kendall_tau", eval.correlation.tau},
              {"spearman_rho", eval.correlation.rho},
              {"systems", systems},
              {"category_counts", counts},
              {"residual_mean", residuals},
              {"warnings", warnings}};
  return doc.dump(indent) + "\n";
}

ReportRow report_row(const std::string& name, const corpus::QrelsSet& gold,
                     const corpus::QrelsSet& generated,
                     const std::vector<corpus::RunRanking>& runs, metrics::AlphaLevel level,
                     const EvalOptions& options) {
  ReportRow row;
  row.name = name;
  const auto agreement = metrics::agreement_report(gold, generated, level);
  row.kappa = agreement.kappa;
  row.alpha = agreement.alpha;
  row.alpha_level = level;
  row.n_pairs = static_cast<std::size_t>(agreement.matrix.n);
  if (agreement.gold_only > 0) {
    row.warnings.push_back(std::to_string(agreement.gold_only) +
                           " gold pairs have no generated label");
  }
  if (!runs.empty()) {
    row.n_systems = runs.size();
    const auto ndcg = system_ranking_correlation(gold, generated, runs, {Metric::kNdcg, 10}, options);
    row.tau_ndcg = ndcg.tau;
    row.rho_ndcg = ndcg.rho;
    const auto map = system_ranking_correlation(gold, generated, runs, {Metric::kMap, 0}, options);
    row.tau_map = map.tau;
    row.rho_map = map.rho;
    for (const auto& w : ndcg.warnings) row.warnings.push_back(w);
  }
  return row;
}

std::string to_text(const ReportRow& row) {
  const std::size_t width = std::max<std::size_t>(24, row.name.size() + 2);
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %13s %13s %9s %9s\n", static_cast<int>(width),
                "method", "kappa", "alpha", "tau(NDCG@10)", "rho(NDCG@10)", "tau(MAP)", "rho(MAP)");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %13s %13s %9s %9s\n", static_cast<int>(width),
                row.name.c_str(), metrics::format_stat(row.kappa).c_str(),
                stat_or_dash(row.alpha).c_str(), stat_or_dash(row.tau_ndcg).c_str(),
                stat_or_dash(row.rho_ndcg).c_str(), stat_or_dash(row.tau_map).c_str(),
                stat_or_dash(row.rho_map).c_str());
  out += buf;
  out += "(alpha " + metrics::alpha_level_name(row.alpha_level) + ", " +
         std::to_string(row.n_pairs) + " pairs, " + std::to_string(row.n_systems) + " systems)\n";
  return out;
}

std::string to_json(const ReportRow& row, int indent) {
  json doc = {{"name", row.name},
              {"kappa", row.kappa},
              {"alpha", optional_json(row.alpha)},
              {"alpha_level", metrics::alpha_level_name(row.alpha_level)},
              {"ndcg@10", {{"kendall_tau", optional_json(row.tau_ndcg)},
                           {"spearman_rho", optional_json(row.rho_ndcg)}}},
              {"map", {{"kendall_tau", optional_json(row.tau_map)},
                       {"spearman_rho", optional_json(row.rho_map)}}},
              {"n_pairs", row.n_pairs},
              {"n_systems", row.n_systems},
              {"warnings", row.warnings}};
  return doc.dump(indent) + "\n";
}

std::uint64_t mix_seed(std::uint64_t pipeline_seed, std::uint64_t endpoint_seed) {
  return splitmix64(pipeline_seed ^ splitmix64(endpoint_seed));
}

PipelineConfig parse_config(std::string_view json_text, const std::string& base_dir,
                            std::optional<std::uint64_t> seed_override) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const std::string where = "config";
  PipelineConfig cfg;
  cfg.seed = seed_override.value_or(get_or<std::uint64_t>(doc, "seed", 0, where));
  cfg.passage_budget = get_or<std::size_t>(doc, "passage_budget", cfg.passage_budget, where);
  cfg.policy = blender::parse_policy(get_or<std::string>(doc, "policy", "mv-avg", where), cfg.seed);
  cfg.cache_path = resolve(base_dir, get_or<std::string>(doc, "cache", "", where));

  if (auto it = doc.find("endpoints"); it != doc.end()) {
    if (!it->is_object()) throw ConfigError("config: 'endpoints' must be an object");
    for (const auto& [id, e] : it->items()) cfg.endpoints.emplace(id, parse_endpoint(id, e, cfg.seed));
  }

  judge::TemplateLibrary library;
  const auto manifest = get_or<std::string>(doc, "templates", "", where);
  if (!manifest.empty()) library = judge::load_template_manifest(resolve(base_dir, manifest));

  if (auto it = doc.find("judges"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError("config: 'judges' must be an array");
    std::set<std::string> seen;
    for (const auto& j : *it) {
      const auto id = get_or<std::string>(j, "id", "", "judge");
      if (id.empty()) throw ConfigError("config: every judge needs an 'id'");
      const std::string jwhere = "judge '" + id + "'";
      if (!seen.insert(id).second) throw ConfigError("config: judge '" + id + "' defined twice");
      const auto ep = get_or<std::string>(j, "endpoint", "", jwhere);
      auto e = cfg.endpoints.find(ep);
      if (e == cfg.endpoints.end()) {
        throw ConfigError(jwhere + ": unknown endpoint '" + ep + "'");
      }
      const auto tname = get_or<std::string>(j, "template", "", jwhere);
      auto t = library.find(tname);
      if (t == library.end()) {
        throw ConfigError(jwhere + ": unknown template '" + tname + "'" +
                          (manifest.empty() ? " (config names no template manifest)" : ""));
      }
      cfg.judges.push_back({id, e->second, t->second});
    }
  }

  if (auto it = doc.find("panel"); it != doc.end()) {
    const std::string pwhere = "panel";
    cfg.panel.panel_id = get_or<std::string>(*it, "id", "panel", pwhere);
    cfg.panel.variant = blender::parse_variant(get_or<std::string>(*it, "variant", "llm", pwhere));
    for (const auto& id : get_or<std::vector<std::string>>(*it, "judges", {}, pwhere)) {
      auto j = std::find_if(cfg.judges.begin(), cfg.judges.end(),
                            [&](const judge::JudgeConfig& c) { return c.judge_id == id; });
      if (j == cfg.judges.end()) throw ConfigError("panel: unknown judge '" + id + "'");
      cfg.panel.judges.push_back(*j);
    }
    blender::validate(cfg.panel);
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::string text;
  try {
    text = corpus::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  PipelineConfig cfg =
      parse_config(text, fs::path(path).parent_path().string(), seed_override);
  cfg.source_path = path;
  return cfg;
}

const judge::JudgeConfig& find_judge(const PipelineConfig& config, const std::string& judge_id) {
  for (const auto& j : config.judges) {
    if (j.judge_id == judge_id) return j;
  }
  throw ConfigError("no judge '" + judge_id + "' in the config");
}

SynthCorpus synthesize(const SynthOptions& options) {
  if (options.n_queries == 0 || options.docs_per_query == 0) {
    throw ConfigError("synthetic corpus needs at least one query and one passage per query");
  }
  double total_weight = 0.0;
  for (double w : options.label_weights) {
    if (w < 0.0) throw ConfigError("label weights must be non-negative");
    total_weight += w;
  }
  if (total_weight <= 0.0) throw ConfigError("label weights must not all be zero");

  std::mt19937_64 rng(options.seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto gaussian = [&] {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  static constexpr std::array<const char*, 16> kWords = {
      "river", "protein", "market", "engine", "climate", "vaccine", "orbit",  "ledger",
      "harbor", "enzyme", "tariff", "turbine", "glacier", "antigen", "comet", "audit"};

  SynthCorpus out;
  out.qrels.set_source_tag("synthetic");
  const std::size_t n_docs = options.n_queries * options.docs_per_query;
  for (std::size_t q = 0; q < options.n_queries; ++q) {
    const std::string qid = pad_id("q", q + 1, options.n_queries);
    const auto topic = kWords[q % kWords.size()];
    out.queries.push_back({qid, std::string("what is known about the ") + topic + " " +
                                    kWords[(q * 7 + 3) % kWords.size()]});
    for (std::size_t d = 0; d < options.docs_per_query; ++d) {
      const std::string did = pad_id("p", q * options.docs_per_query + d + 1, n_docs);
      double u = uniform() * total_weight;
      int label = 3;
      for (int l = 0; l < 4; ++l) {
        if (u < options.label_weights[static_cast<std::size_t>(l)]) {
          label = l;
          break;
        }
        u -= options.label_weights[static_cast<std::size_t>(l)];
      }
      std::string text = "passage about";
      for (int w = 0; w < 6; ++w) text += std::string(" ") + kWords[rng() % kWords.size()];
      if (label >= 2) text += std::string(" and the ") + topic;
      out.passages.push_back({did, text});
      out.qrels.insert(qid, did, corpus::RelevanceLabel(label));
    }
  }

  static constexpr std::array<BiasCategory, 4> kCycle = {BiasCategory::kGpt, BiasCategory::kT5,
                                                         BiasCategory::kGptT5, BiasCategory::kOther};
  for (std::size_t r = 0; r < options.n_runs; ++r) {
    const std::string tag = pad_id("run", r + 1, options.n_runs);
    corpus::RunRanking run(tag);
    const double sigma = 0.4 + 0.3 * static_cast<double>(r);
    for (const auto& [key, label] : out.qrels.entries()) {
      const double score = static_cast<double>(label.value()) + sigma * gaussian();
      run.add(key.first, key.second, std::round(score * 1e4) / 1e4);
    }
    out.runs.push_back(std::move(run));
    out.categories[tag] = kCycle[r % kCycle.size()];
  }
  return out;
}

void write_synth(const SynthCorpus& corpus, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "runs", ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  const fs::path dir(out_dir);
  corpus::write_file((dir / "queries.tsv").string(), corpus::write_queries(corpus.queries));
  corpus::write_file((dir / "passages.tsv").string(), corpus::write_passages(corpus.passages));
  corpus::write_file((dir / "qrels.txt").string(), corpus::write_qrels(corpus.qrels));
  for (const auto& run : corpus.runs) {
    corpus::write_file((dir / "runs" / (run.run_tag() + ".run")).string(), corpus::write_run(run));
  }
  std::string csv = "run_tag,category\n";
  for (const auto& [tag, category] : corpus.categories) {
    csv += tag + "," + std::string(category_name(category)) + "\n";
  }
  corpus::write_file((dir / "categories.csv").string(), csv);
}

}  // namespace judgeblender::harness
