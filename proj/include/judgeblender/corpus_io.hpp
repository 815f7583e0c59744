#pragma once

// TREC-style file formats: qrels, runs, queries and passages.

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace judgeblender::corpus {

// Grade on the TREC DL four-point scale.
class RelevanceLabel {
 public:
  static constexpr int kMin = 0;
  static constexpr int kMax = 3;

  // Throws DataError outside [0, 3].
  explicit RelevanceLabel(int value);

  int value() const noexcept { return value_; }

  friend auto operator<=>(const RelevanceLabel&, const RelevanceLabel&) = default;

 private:
  int value_ = 0;
};

struct Query {
  std::string query_id;
  std::string text;

  friend bool operator==(const Query&, const Query&) = default;
};

struct Passage {
  std::string doc_id;
  std::string text;

  friend bool operator==(const Passage&, const Passage&) = default;
};

// (query_id, doc_id); ordering is plain byte-wise lexicographic.
using PairKey = std::pair<std::string, std::string>;

class QrelsSet {
 public:
  using Map = std::map<PairKey, RelevanceLabel>;

  QrelsSet() = default;
  explicit QrelsSet(std::string source_tag) : source_tag_(std::move(source_tag)) {}

  // Throws DataError on a duplicate key.
  void insert(const std::string& query_id, const std::string& doc_id,
              RelevanceLabel label);
  void insert_or_assign(const std::string& query_id, const std::string& doc_id,
                        RelevanceLabel label);

  std::optional<RelevanceLabel> find(const std::string& query_id,
                                     const std::string& doc_id) const;
  bool contains(const PairKey& key) const { return entries_.contains(key); }

  const Map& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const std::string& source_tag() const noexcept { return source_tag_; }
  void set_source_tag(std::string tag) { source_tag_ = std::move(tag); }

  // Labels of one query keyed by doc id.
  std::map<std::string, int> labels_for(const std::string& query_id) const;
  std::vector<std::string> query_ids() const;

  // Entry maps only; the source tag is provenance and not compared.
  friend bool operator==(const QrelsSet& a, const QrelsSet& b) {
    return a.entries_ == b.entries_;
  }

 private:
  Map entries_;
  std::string source_tag_;
};

struct RankedDoc {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const RankedDoc&, const RankedDoc&) = default;
};

// One system's ranked output. Each per-query list is ordered by descending
// score with ties broken by ascending doc id.
class RunRanking {
 public:
  RunRanking() = default;
  explicit RunRanking(std::string run_tag) : run_tag_(std::move(run_tag)) {}

  const std::string& run_tag() const noexcept { return run_tag_; }
  void set_run_tag(std::string tag) { run_tag_ = std::move(tag); }

  // Adds a document and keeps the query list ordered. Throws DataError if the
  // doc is already ranked for that query.
  void add(const std::string& query_id, std::string doc_id, double score);

  const std::map<std::string, std::vector<RankedDoc>>& rankings() const noexcept {
    return rankings_;
  }
  // Empty list when the query is absent.
  const std::vector<RankedDoc>& ranking(const std::string& query_id) const;
  std::vector<std::string> doc_ids(const std::string& query_id) const;

  friend bool operator==(const RunRanking&, const RunRanking&) = default;

 private:
  std::string run_tag_;
  std::map<std::string, std::vector<RankedDoc>> rankings_;
};

struct DatasetStats {
  std::size_t n_queries = 0;
  std::size_t n_passages = 0;
  std::size_t n_qrels = 0;
  std::array<std::size_t, 4> label_histogram{};

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct ParseOptions {
  // Skip malformed lines instead of failing; each skip is still reported
  // through ParseDiagnostics when one is supplied.
  bool lenient = false;
  // Map labels < 0 to 0 and > 3 to 3 instead of failing.
  bool clamp_labels = false;
  // Name used in diagnostics.
  std::string source_name = "<input>";
};

struct ParseDiagnostics {
  std::vector<std::string> skipped;  // "line N: reason"
};

QrelsSet parse_qrels(std::istream& in, const ParseOptions& options = {},
                     ParseDiagnostics* diagnostics = nullptr);
QrelsSet parse_qrels(std::string_view text, const ParseOptions& options = {},
                     ParseDiagnostics* diagnostics = nullptr);
std::string write_qrels(const QrelsSet& qrels);

RunRanking parse_run(std::istream& in, const ParseOptions& options = {},
                     ParseDiagnostics* diagnostics = nullptr);
RunRanking parse_run(std::string_view text, const ParseOptions& options = {},
                     ParseDiagnostics* diagnostics = nullptr);
std::string write_run(const RunRanking& run);

std::vector<Query> parse_queries(std::istream& in, const ParseOptions& options = {},
                                 ParseDiagnostics* diagnostics = nullptr);
std::vector<Query> parse_queries(std::string_view text, const ParseOptions& options = {},
                                 ParseDiagnostics* diagnostics = nullptr);
std::vector<Passage> parse_passages(std::istream& in, const ParseOptions& options = {},
                                    ParseDiagnostics* diagnostics = nullptr);
std::vector<Passage> parse_passages(std::string_view text,
                                    const ParseOptions& options = {},
                                    ParseDiagnostics* diagnostics = nullptr);
std::string write_queries(const std::vector<Query>& queries);
std::string write_passages(const std::vector<Passage>& passages);

// When a collection is empty its count falls back to the distinct ids seen in
// the qrels.
DatasetStats dataset_stats(const QrelsSet& qrels, const std::vector<Query>& queries,
                           const std::vector<Passage>& passages);

bool is_valid_utf8(std::string_view text) noexcept;

// File helpers; throw IoError when the file cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);
QrelsSet load_qrels(const std::string& path, const ParseOptions& options = {});
RunRanking load_run(const std::string& path, const ParseOptions& options = {});
// Every regular file in the directory, sorted by file name.
std::vector<RunRanking> load_run_dir(const std::string& dir,
                                     const ParseOptions& options = {});
std::vector<Query> load_queries(const std::string& path, const ParseOptions& options = {});
std::vector<Passage> load_passages(const std::string& path,
                                   const ParseOptions& options = {});

}  // namespace judgeblender::corpus
