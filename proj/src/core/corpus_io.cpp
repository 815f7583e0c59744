#include "judgeblender/corpus_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include "judgeblender/error.hpp"

namespace judgeblender::corpus {

namespace {

bool is_field_sep(char c) { return c == ' ' || c == '\t'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_field_sep(line[i])) ++i;
    if (i == line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !is_field_sep(line[j])) ++j;
    fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), is_field_sep);
}

// Calls fn(line_number, line) for each line with the trailing CR removed.
// Validates UTF-8 per line.
template <typename Fn>
void for_each_line(std::string_view text, const ParseOptions& options, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!is_valid_utf8(line)) {
      throw ParseError(options.source_name, line_no, "invalid UTF-8 sequence");
    }
    fn(line_no, line);
    pos = end + 1;
  }
}

// Runs one line handler; in lenient mode a DataError on that line becomes a
// recorded skip.
template <typename Fn>
void guarded(const ParseOptions& options, ParseDiagnostics* diagnostics,
             std::size_t line_no, Fn&& fn) {
  if (!options.lenient) {
    fn();
    return;
  }
  try {
    fn();
  } catch (const DataError& e) {
    if (diagnostics != nullptr) {
      diagnostics->skipped.push_back("line " + std::to_string(line_no) + ": " +
                                     e.what());
    }
  }
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

std::string slurp(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

template <typename Record, typename Make>
std::vector<Record> parse_id_text(std::string_view text, const ParseOptions& options,
                                  ParseDiagnostics* diagnostics, const char* kind,
                                  Make&& make) {
  std::vector<Record> out;
  std::unordered_set<std::string> seen;
  for_each_line(text, options, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) return;
    guarded(options, diagnostics, line_no, [&] {
      const auto tab = line.find('\t');
      if (tab == std::string_view::npos) {
        throw ParseError(options.source_name, line_no,
                         std::string("expected '<id>\\t<text>' ") + kind + " record");
      }
      std::string_view id = line.substr(0, tab);
      std::string_view body = line.substr(tab + 1);
      if (id.empty() || has_whitespace(id)) {
        throw ParseError(options.source_name, line_no,
                         std::string("empty or whitespace-containing ") + kind + " id");
      }
      if (body.empty()) {
        throw ParseError(options.source_name, line_no,
                         std::string("empty text for ") + kind + " '" + std::string(id) + "'");
      }
      if (!seen.insert(std::string(id)).second) {
        throw ParseError(options.source_name, line_no,
                         std::string("duplicate ") + kind + " id '" + std::string(id) + "'");
      }
      out.push_back(make(std::string(id), std::string(body)));
    });
  });
  return out;
}

void append_double(std::string& out, double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

}  // namespace

RelevanceLabel::RelevanceLabel(int value) : value_(value) {
  if (value < kMin || value > kMax) {
    throw DataError("relevance label " + std::to_string(value) + " outside 0-3");
  }
}

void QrelsSet::insert(const std::string& query_id, const std::string& doc_id,
                      RelevanceLabel label) {
  auto [it, inserted] = entries_.emplace(PairKey{query_id, doc_id}, label);
  if (!inserted) {
    throw DataError("duplicate qrels entry (" + query_id + ", " + doc_id + ")");
  }
}

void QrelsSet::insert_or_assign(const std::string& query_id, const std::string& doc_id,
                                RelevanceLabel label) {
  entries_.insert_or_assign(PairKey{query_id, doc_id}, label);
}

std::optional<RelevanceLabel> QrelsSet::find(const std::string& query_id,
                                             const std::string& doc_id) const {
  auto it = entries_.find(PairKey{query_id, doc_id});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, int> QrelsSet::labels_for(const std::string& query_id) const {
  std::map<std::string, int> out;
  for (auto it = entries_.lower_bound(PairKey{query_id, ""});
       it != entries_.end() && it->first.first == query_id; ++it) {
    out.emplace(it->first.second, it->second.value());
  }
  return out;
}

std::vector<std::string> QrelsSet::query_ids() const {
  std::vector<std::string> ids;
  for (const auto& [key, label] : entries_) {
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  }
  return ids;
}

void RunRanking::add(const std::string& query_id, std::string doc_id, double score) {
  auto& list = rankings_[query_id];
  const auto before = [](const RankedDoc& a, const RankedDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  };
  for (const auto& d : list) {
    if (d.doc_id == doc_id) {
      throw DataError("duplicate doc '" + doc_id + "' in query '" + query_id + "'");
    }
  }
  RankedDoc doc{std::move(doc_id), score};
  list.insert(std::upper_bound(list.begin(), list.end(), doc, before), std::move(doc));
}

const std::vector<RankedDoc>& RunRanking::ranking(const std::string& query_id) const {
  static const std::vector<RankedDoc> kEmpty;
  auto it = rankings_.find(query_id);
  return it == rankings_.end() ? kEmpty : it->second;
}

std::vector<std::string> RunRanking::doc_ids(const std::string& query_id) const {
  std::vector<std::string> ids;
  for (const auto& d : ranking(query_id)) ids.push_back(d.doc_id);
  return ids;
}

QrelsSet parse_qrels(std::string_view text, const ParseOptions& options,
                     ParseDiagnostics* diagnostics) {
  QrelsSet qrels;
  for_each_line(text, options, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) return;
    guarded(options, diagnostics, line_no, [&] {
      const auto f = split_fields(line);
      if (f.size() < 4) {
        throw ParseError(options.source_name, line_no,
                         "expected '<qid> 0 <docid> <label>', got " +
                             std::to_string(f.size()) + " field(s)");
      }
      int value = 0;
      if (!parse_number(f[3], value)) {
        throw ParseError(options.source_name, line_no,
                         "label '" + std::string(f[3]) + "' is not an integer");
      }
      if (options.clamp_labels) value = std::clamp(value, RelevanceLabel::kMin,
                                                   RelevanceLabel::kMax);
      if (value < RelevanceLabel::kMin || value > RelevanceLabel::kMax) {
        throw ParseError(options.source_name, line_no,
                         "label " + std::to_string(value) + " outside 0-3");
      }
      std::string qid(f[0]);
      std::string docid(f[2]);
      if (qrels.contains(PairKey{qid, docid})) {
        throw ParseError(options.source_name, line_no,
                         "duplicate entry (" + qid + ", " + docid + ")");
      }
      qrels.insert(qid, docid, RelevanceLabel(value));
    });
  });
  return qrels;
}

QrelsSet parse_qrels(std::istream& in, const ParseOptions& options,
                     ParseDiagnostics* diagnostics) {
  return parse_qrels(slurp(in), options, diagnostics);
}

std::string write_qrels(const QrelsSet& qrels) {
  std::string out;
  for (const auto& [key, label] : qrels.entries()) {
    out += key.first;
    out += " 0 ";
    out += key.second;
    out += ' ';
    out += static_cast<char>('0' + label.value());
    out += '\n';
  }
  return out;
}

RunRanking parse_run(std::string_view text, const ParseOptions& options,
                     ParseDiagnostics* diagnostics) {
  RunRanking run;
  bool have_tag = false;
  for_each_line(text, options, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) return;
    guarded(options, diagnostics, line_no, [&] {
      const auto f = split_fields(line);
      if (f.size() != 6) {
        throw ParseError(options.source_name, line_no,
                         "expected '<qid> Q0 <docid> <rank> <score> <tag>', got " +
                             std::to_string(f.size()) + " field(s)");
      }
      long long rank = 0;
      if (!parse_number(f[3], rank)) {
        throw ParseError(options.source_name, line_no,
                         "rank '" + std::string(f[3]) + "' is not an integer");
      }
      double score = 0.0;
      if (!parse_number(f[4], score) || !std::isfinite(score)) {
        throw ParseError(options.source_name, line_no,
                         "score '" + std::string(f[4]) + "' is not a finite number");
      }
      if (!have_tag) {
        run.set_run_tag(std::string(f[5]));
        have_tag = true;
      } else if (run.run_tag() != f[5]) {
        throw ParseError(options.source_name, line_no,
                         "run tag '" + std::string(f[5]) + "' differs from '" +
                             run.run_tag() + "'");
      }
      try {
        run.add(std::string(f[0]), std::string(f[2]), score);
      } catch (const ParseError&) {
        throw;
      } catch (const DataError& e) {
        throw ParseError(options.source_name, line_no, e.what());
      }
    });
  });
  return run;
}

RunRanking parse_run(std::istream& in, const ParseOptions& options,
                     ParseDiagnostics* diagnostics) {
  return parse_run(slurp(in), options, diagnostics);
}

std::string write_run(const RunRanking& run) {
  std::string out;
  for (const auto& [qid, docs] : run.rankings()) {
    std::size_t rank = 0;
    for (const auto& d : docs) {
      out += qid;
      out += " Q0 ";
      out += d.doc_id;
      out += ' ';
      out += std::to_string(++rank);
      out += ' ';
      append_double(out, d.score);
      out += ' ';
      out += run.run_tag();
      out += '\n';
    }
  }
  return out;
}

std::vector<Query> parse_queries(std::string_view text, const ParseOptions& options,
                                 ParseDiagnostics* diagnostics) {
  return parse_id_text<Query>(text, options, diagnostics, "query",
                              [](std::string id, std::string body) {
                                return Query{std::move(id), std::move(body)};
                              });
}

std::vector<Query> parse_queries(std::istream& in, const ParseOptions& options,
                                 ParseDiagnostics* diagnostics) {
  return parse_queries(slurp(in), options, diagnostics);
}

std::vector<Passage> parse_passages(std::string_view text, const ParseOptions& options,
                                    ParseDiagnostics* diagnostics) {
  return parse_id_text<Passage>(text, options, diagnostics, "passage",
                                [](std::string id, std::string body) {
                                  return Passage{std::move(id), std::move(body)};
                                });
}

std::vector<Passage> parse_passages(std::istream& in, const ParseOptions& options,
                                    ParseDiagnostics* diagnostics) {
  return parse_passages(slurp(in), options, diagnostics);
}

std::string write_queries(const std::vector<Query>& queries) {
  std::string out;
  for (const auto& q : queries) out += q.query_id + '\t' + q.text + '\n';
  return out;
}

std::string write_passages(const std::vector<Passage>& passages) {
  std::string out;
  for (const auto& p : passages) out += p.doc_id + '\t' + p.text + '\n';
  return out;
}

DatasetStats dataset_stats(const QrelsSet& qrels, const std::vector<Query>& queries,
                           const std::vector<Passage>& passages) {
  DatasetStats stats;
  stats.n_qrels = qrels.size();
  std::set<std::string_view> qids;
  std::set<std::string_view> docids;
  for (const auto& [key, label] : qrels.entries()) {
    ++stats.label_histogram[static_cast<std::size_t>(label.value())];
    qids.insert(key.first);
    docids.insert(key.second);
  }
  stats.n_queries = queries.empty() ? qids.size() : queries.size();
  stats.n_passages = passages.empty() ? docids.size() : passages.size();
  return stats;
}

bool is_valid_utf8(std::string_view text) noexcept {
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = s[i];
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (s[i + k] & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string data = slurp(in);
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return data;
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("error writing '" + path + "'");
}

namespace {
ParseOptions named(ParseOptions options, const std::string& path) {
  options.source_name = path;
  return options;
}
}  // namespace

QrelsSet load_qrels(const std::string& path, const ParseOptions& options) {
  return parse_qrels(read_file(path), named(options, path));
}

RunRanking load_run(const std::string& path, const ParseOptions& options) {
  return parse_run(read_file(path), named(options, path));
}

std::vector<RunRanking> load_run_dir(const std::string& dir, const ParseOptions& options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list '" + dir + "': " + ec.message());
  std::sort(files.begin(), files.end());
  std::vector<RunRanking> runs;
  std::set<std::string> tags;
  for (const auto& f : files) {
    runs.push_back(load_run(f.string(), options));
    if (runs.back().run_tag().empty()) {
      runs.back().set_run_tag(f.stem().string());
    }
    if (!tags.insert(runs.back().run_tag()).second) {
      throw DataError("run tag '" + runs.back().run_tag() + "' appears in more than one file");
    }
  }
  return runs;
}

std::vector<Query> load_queries(const std::string& path, const ParseOptions& options) {
  return parse_queries(read_file(path), named(options, path));
}

std::vector<Passage> load_passages(const std::string& path, const ParseOptions& options) {
  return parse_passages(read_file(path), named(options, path));
}

}  // namespace judgeblender::corpus
