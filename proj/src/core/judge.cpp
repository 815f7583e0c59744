#include "judgeblender/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "judgeblender/error.hpp"
#include "json.hpp"

namespace judgeblender::judge {

namespace {

using json = nlohmann::json;

constexpr std::size_t kMultiCriteriaFinalStage = 4;
constexpr std::array<std::string_view, 4> kCriteriaNames = {"Exactness", "Coverage", "Topicality",
                                                            "Contextual Fit"};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Calls on_text(literal) and on_placeholder(name) in order.
template <typename Text, typename Placeholder>
void scan_template(std::string_view t, Text&& on_text, Placeholder&& on_placeholder) {
  std::size_t literal_start = 0;
  std::size_t i = 0;
  while (i < t.size()) {
    if (t[i] == '{' && i + 1 < t.size() && is_ident_start(t[i + 1])) {
      std::size_t j = i + 1;
      while (j < t.size() && is_ident_char(t[j])) ++j;
      if (j < t.size() && t[j] == '}') {
        on_text(t.substr(literal_start, i - literal_start));
        on_placeholder(t.substr(i + 1, j - i - 1));
        i = j + 1;
        literal_start = i;
        continue;
      }
    }
    ++i;
  }
  on_text(t.substr(literal_start));
}

// Largest prefix length <= budget that does not split a UTF-8 sequence.
std::size_t utf8_prefix(std::string_view s, std::size_t budget) {
  if (s.size() <= budget) return s.size();
  std::size_t n = budget;
  while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
  return n;
}

std::vector<std::string> allowed_placeholders(PromptFamily family, std::size_t stage) {
  std::vector<std::string> names = {"query", "passage"};
  if (family == PromptFamily::kMultiCriteria && stage == kMultiCriteriaFinalStage) {
    names.emplace_back("criteria_scores");
  }
  return names;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<int> small_int(std::string_view digits) {
  if (digits.empty() || digits.size() > 4) return std::nullopt;
  int v = 0;
  for (char c : digits) {
    if (!is_digit(c)) return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

std::string_view family_name(PromptFamily family) {
  switch (family) {
    case PromptFamily::kDirectGrading: return "direct";
    case PromptFamily::kMultiCriteria: return "multi_criteria";
    case PromptFamily::kTwoStep: return "two_step";
  }
  return "direct";
}

PromptFamily parse_family(std::string_view name) {
  if (name == "direct") return PromptFamily::kDirectGrading;
  if (name == "multi_criteria") return PromptFamily::kMultiCriteria;
  if (name == "two_step") return PromptFamily::kTwoStep;
  throw ConfigError("unknown prompt family '" + std::string(name) +
                    "' (expected direct, multi_criteria or two_step)");
}

std::size_t stage_count(PromptFamily family) {
  switch (family) {
    case PromptFamily::kDirectGrading: return 1;
    case PromptFamily::kMultiCriteria: return 5;
    case PromptFamily::kTwoStep: return 2;
  }
  return 1;
}

std::vector<std::string> placeholders(std::string_view stage_text) {
  std::vector<std::string> names;
  scan_template(stage_text, [](std::string_view) {},
                [&](std::string_view name) { names.emplace_back(name); });
  return names;
}

void validate(const PromptTemplate& tmpl) {
  const std::size_t expected = stage_count(tmpl.family);
  if (tmpl.stages.size() != expected) {
    throw ConfigError("template '" + tmpl.name + "' (" + std::string(family_name(tmpl.family)) +
                      ") needs " + std::to_string(expected) + " stage(s), has " +
                      std::to_string(tmpl.stages.size()));
  }
  for (std::size_t s = 0; s < tmpl.stages.size(); ++s) {
    const auto allowed = allowed_placeholders(tmpl.family, s);
    for (const auto& name : placeholders(tmpl.stages[s])) {
      if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
        throw ConfigError("template '" + tmpl.name + "' stage " + std::to_string(s + 1) +
                          " uses undeclared placeholder {" + name + "}");
      }
    }
  }
}

TemplateLibrary load_template_manifest(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const json doc = json::parse(corpus::read_file(manifest_path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("templates") ||
      !doc["templates"].is_object()) {
    throw ConfigError("template manifest '" + manifest_path + "' has no \"templates\" object");
  }
  const fs::path base = fs::path(manifest_path).parent_path();
  TemplateLibrary library;
  for (const auto& [name, spec] : doc["templates"].items()) {
    if (!spec.is_object() || !spec.contains("family") || !spec.contains("stages") ||
        !spec["stages"].is_array()) {
      throw ConfigError("template '" + name + "' needs \"family\" and \"stages\"");
    }
    PromptTemplate tmpl;
    tmpl.name = name;
    tmpl.family = parse_family(spec["family"].get<std::string>());
    for (const auto& file : spec["stages"]) {
      if (!file.is_string()) throw ConfigError("template '" + name + "': stage must be a path");
      tmpl.stages.push_back(corpus::read_file((base / file.get<std::string>()).string()));
    }
    validate(tmpl);
    library.emplace(name, std::move(tmpl));
  }
  return library;
}

RenderedPrompt render_prompt(std::string_view template_stage, const corpus::Query& query,
                             const corpus::Passage& passage,
                             const std::map<std::string, std::string>& extra,
                             std::size_t passage_budget) {
  RenderedPrompt out;
  const std::size_t keep = utf8_prefix(passage.text, passage_budget);
  out.truncated = keep < passage.text.size();
  const std::string_view passage_text = std::string_view(passage.text).substr(0, keep);
  scan_template(
      template_stage, [&](std::string_view literal) { out.text.append(literal); },
      [&](std::string_view name) {
        if (name == "query") {
          out.text += query.text;
        } else if (name == "passage") {
          out.text.append(passage_text);
        } else if (auto it = extra.find(std::string(name)); it != extra.end()) {
          out.text += it->second;
        } else {
          throw ConfigError("unresolved placeholder {" + std::string(name) + "}");
        }
      });
  return out;
}

std::string_view status_name(ParseStatus status) {
  switch (status) {
    case ParseStatus::kClean: return "clean";
    case ParseStatus::kLenient: return "lenient";
    case ParseStatus::kDefaulted: return "defaulted";
  }
  return "defaulted";
}

ParseStatus parse_status_name(std::string_view name) {
  if (name == "clean") return ParseStatus::kClean;
  if (name == "lenient") return ParseStatus::kLenient;
  if (name == "defaulted") return ParseStatus::kDefaulted;
  throw DataError("unknown parse status '" + std::string(name) + "'");
}

LabelParse parse_label(std::string_view text, LabelRange range) {
  const auto in_range = [&](int v) { return v >= range.lo && v <= range.hi; };
  if (auto v = small_int(trim(text)); v && in_range(*v)) return {*v, ParseStatus::kClean};

  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    const char prev = i > 0 ? text[i - 1] : ' ';
    const bool glued_before = is_ident_char(prev) || prev == '.' || prev == '-';
    const bool glued_after =
        j < text.size() && (is_ident_char(text[j]) ||
                            (text[j] == '.' && j + 1 < text.size() && is_digit(text[j + 1])));
    if (!glued_before && !glued_after) {
      if (auto v = small_int(text.substr(i, j - i)); v && in_range(*v)) {
        return {*v, ParseStatus::kLenient};
      }
    }
    i = j;
  }
  return {range.lo, ParseStatus::kDefaulted};
}

std::string to_jsonl(const std::vector<JudgmentRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json line = {{"query_id", r.query_id},
                 {"doc_id", r.doc_id},
                 {"judge_id", r.judge_id},
                 {"label", r.label},
                 {"raw_text", r.raw_text},
                 {"parse_status", status_name(r.parse_status)},
                 {"truncated", r.truncated}};
    if (r.stage_labels) {
      line["stage_labels"] = *r.stage_labels;
      json statuses = json::array();
      for (auto s : r.stage_status) statuses.push_back(status_name(s));
      line["stage_status"] = std::move(statuses);
    } else {
      line["stage_labels"] = nullptr;
    }
    if (!r.error.empty()) line["error"] = r.error;
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<JudgmentRecord> parse_judgments(std::string_view jsonl,
                                            const std::string& source_name) {
  std::vector<JudgmentRecord> records;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      JudgmentRecord r;
      r.query_id = j.at("query_id").get<std::string>();
      r.doc_id = j.at("doc_id").get<std::string>();
      r.judge_id = j.at("judge_id").get<std::string>();
      r.label = corpus::RelevanceLabel(j.at("label").get<int>()).value();
      r.raw_text = j.value("raw_text", "");
      r.parse_status = parse_status_name(j.at("parse_status").get<std::string>());
      r.truncated = j.value("truncated", false);
      r.error = j.value("error", "");
      if (j.contains("stage_labels") && !j["stage_labels"].is_null()) {
        r.stage_labels = j["stage_labels"].get<std::vector<int>>();
        for (const auto& s : j.value("stage_status", json::array())) {
          r.stage_status.push_back(parse_status_name(s.get<std::string>()));
        }
      }
      records.push_back(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(source_name, line_no, std::string("bad judgment record: ") + e.what());
    }
  }
  return records;
}

std::vector<JudgmentRecord> load_judgments(const std::string& path) {
  return parse_judgments(corpus::read_file(path), path);
}

Judge::Judge(JudgeConfig config, provider::CompletionBackend& backend,
             provider::ResponseCache* cache, JudgeOptions options)
    : config_(std::move(config)), backend_(&backend), cache_(cache), options_(options) {
  if (config_.judge_id.empty()) throw ConfigError("judge id must not be empty");
  validate(config_.prompt);
  provider::validate(config_.endpoint);
}

std::string Judge::call(const std::string& prompt) const {
  if (cache_ != nullptr) {
    return provider::cached_complete(*cache_, *backend_, config_.endpoint, prompt).text;
  }
  return backend_->complete(config_.endpoint, prompt).text;
}

std::optional<int> Judge::gold_for(const corpus::Query& query,
                                   const corpus::Passage& passage) const {
  if (options_.gold_hints == nullptr) return std::nullopt;
  if (auto label = options_.gold_hints->find(query.query_id, passage.doc_id)) {
    return label->value();
  }
  return std::nullopt;
}

Judge::StageResult Judge::run_stage(std::size_t stage, LabelRange range,
                                    const corpus::Query& query, const corpus::Passage& passage,
                                    const std::map<std::string, std::string>& extra,
                                    std::optional<int> oracle_answer) const {
  StageResult result;
  const RenderedPrompt rendered = render_prompt(config_.prompt.stages.at(stage), query, passage,
                                                extra, options_.passage_budget);
  result.truncated = rendered.truncated;
  std::string prompt = rendered.text;
  if (oracle_answer) prompt += "\n" + provider::oracle_marker(*oracle_answer);

  const int attempts = options_.parse_retry ? 2 : 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    const std::string sent = attempt == 0 ? prompt : prompt + std::string(kRetryReminder);
    try {
      ++result.calls;
      result.raw_text = call(sent);
    } catch (const ProviderError& e) {
      if (options_.fail_fast) throw;
      result.error = e.what();
      result.parse = {range.lo, ParseStatus::kDefaulted};
      return result;
    }
    result.parse = parse_label(result.raw_text, range);
    if (result.parse.status != ParseStatus::kDefaulted) break;
  }
  return result;
}

JudgmentRecord Judge::blank_record(const corpus::Query& query,
                                   const corpus::Passage& passage) const {
  JudgmentRecord r;
  r.query_id = query.query_id;
  r.doc_id = passage.doc_id;
  r.judge_id = config_.judge_id;
  return r;
}

JudgmentRecord Judge::judge_direct(const corpus::Query& query,
                                   const corpus::Passage& passage) const {
  JudgmentRecord r = blank_record(query, passage);
  const auto s = run_stage(0, {0, 3}, query, passage, {}, gold_for(query, passage));
  r.label = s.parse.label;
  r.parse_status = s.parse.status;
  r.raw_text = s.raw_text;
  r.error = s.error;
  r.truncated = s.truncated;
  r.provider_calls = s.calls;
  return r;
}

JudgmentRecord Judge::judge_two_step(const corpus::Query& query,
                                     const corpus::Passage& passage) const {
  JudgmentRecord r = blank_record(query, passage);
  const auto gold = gold_for(query, passage);
  const auto verdict = run_stage(0, {0, 1}, query, passage, {},
                                 gold ? std::optional<int>(*gold >= 1 ? 1 : 0) : std::nullopt);
  r.truncated = verdict.truncated;
  r.provider_calls = verdict.calls;
  r.stage_labels = std::vector<int>{verdict.parse.label};
  r.stage_status = {verdict.parse.status};
  if (verdict.parse.label == 0) {
    r.label = 0;
    r.parse_status = verdict.parse.status;
    r.raw_text = verdict.raw_text;
    r.error = verdict.error;
    return r;
  }
  const auto grade = run_stage(1, {1, 3}, query, passage, {}, gold);
  r.stage_labels->push_back(grade.parse.label);
  r.stage_status.push_back(grade.parse.status);
  r.label = grade.parse.label;
  r.parse_status = grade.parse.status;
  r.raw_text = grade.raw_text;
  r.error = grade.error;
  r.truncated = r.truncated || grade.truncated;
  r.provider_calls += grade.calls;
  return r;
}

JudgmentRecord Judge::judge_multicriteria(const corpus::Query& query,
                                          const corpus::Passage& passage) const {
  JudgmentRecord r = blank_record(query, passage);
  const auto gold = gold_for(query, passage);
  r.stage_labels = std::vector<int>{};
  std::string scores;
  std::vector<std::string> errors;
  for (std::size_t c = 0; c < kCriteriaNames.size(); ++c) {
    const auto s = run_stage(c, {0, 3}, query, passage, {}, gold);
    r.stage_labels->push_back(s.parse.label);
    r.stage_status.push_back(s.parse.status);
    r.truncated = r.truncated || s.truncated;
    r.provider_calls += s.calls;
    if (!s.error.empty()) errors.push_back(s.error);
    scores += std::string(kCriteriaNames[c]) + ": " + std::to_string(s.parse.label) + "\n";
  }
  if (!scores.empty()) scores.pop_back();
  const auto final_stage = run_stage(kMultiCriteriaFinalStage, {0, 3}, query, passage,
                                     {{"criteria_scores", scores}}, gold);
  r.stage_labels->push_back(final_stage.parse.label);
  r.stage_status.push_back(final_stage.parse.status);
  r.label = final_stage.parse.label;
  r.parse_status = final_stage.parse.status;
  r.raw_text = final_stage.raw_text;
  r.truncated = r.truncated || final_stage.truncated;
  r.provider_calls += final_stage.calls;
  if (!final_stage.error.empty()) errors.push_back(final_stage.error);
  if (!errors.empty()) r.error = errors.front();
  return r;
}

JudgmentRecord Judge::judge(const corpus::Query& query, const corpus::Passage& passage) const {
  switch (config_.prompt.family) {
    case PromptFamily::kDirectGrading: return judge_direct(query, passage);
    case PromptFamily::kTwoStep: return judge_two_step(query, passage);
    case PromptFamily::kMultiCriteria: return judge_multicriteria(query, passage);
  }
  return judge_direct(query, passage);
}

void for_each_bounded(std::size_t total, int concurrency,
                      const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(total, static_cast<std::size_t>(std::max(1, concurrency)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < total; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (!stop.load(std::memory_order_relaxed)) {
        const std::size_t i = next.fetch_add(1);
        if (i >= total) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          stop = true;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

JudgeRun run_judge(const Judge& judge, const PairList& pairs, const ProgressFn& progress) {
  if (pairs.empty()) throw ConfigError("run_judge needs at least one (query, passage) pair");
  JudgeRun run;
  run.records.resize(pairs.size());
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  const int concurrency = judge.options().max_parallel > 0 ? judge.options().max_parallel
                                                           : judge.config().endpoint.max_parallel;
  for_each_bounded(pairs.size(), concurrency, [&](std::size_t i) {
    run.records[i] = judge.judge(pairs[i].first, pairs[i].second);
    const std::size_t n = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(n, pairs.size());
    }
  });
  std::sort(run.records.begin(), run.records.end(),
            [](const JudgmentRecord& a, const JudgmentRecord& b) {
              return std::tie(a.query_id, a.doc_id) < std::tie(b.query_id, b.doc_id);
            });
  auto& s = run.summary;
  s.pairs = run.records.size();
  for (const auto& r : run.records) {
    switch (r.parse_status) {
      case ParseStatus::kClean: ++s.clean; break;
      case ParseStatus::kLenient: ++s.lenient; break;
      case ParseStatus::kDefaulted: ++s.defaulted; break;
    }
    if (!r.error.empty()) ++s.provider_failures;
    if (r.truncated) ++s.truncated;
  }
  return run;
}

PairList make_pairs(const corpus::QrelsSet& pairs_from, const std::vector<corpus::Query>& queries,
                    const std::vector<corpus::Passage>& passages) {
  std::unordered_map<std::string, const corpus::Query*> q_index;
  std::unordered_map<std::string, const corpus::Passage*> p_index;
  for (const auto& q : queries) q_index.emplace(q.query_id, &q);
  for (const auto& p : passages) p_index.emplace(p.doc_id, &p);
  PairList pairs;
  pairs.reserve(pairs_from.size());
  for (const auto& [key, label] : pairs_from.entries()) {
    auto q = q_index.find(key.first);
    if (q == q_index.end()) throw DataError("no text for query '" + key.first + "'");
    auto p = p_index.find(key.second);
    if (p == p_index.end()) throw DataError("no text for passage '" + key.second + "'");
    pairs.emplace_back(*q->second, *p->second);
  }
  return pairs;
}

}  // namespace judgeblender::judge
