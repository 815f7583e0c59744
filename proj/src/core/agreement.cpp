#include "judgeblender/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "judgeblender/error.hpp"
#include "json.hpp"

namespace judgeblender::metrics {

namespace {

using json = nlohmann::json;

constexpr std::array<const char*, 4> kLevelNames = {"Irrelevant", "Related", "High.rel",
                                                    "Perfect.rel"};

void check_label(int l) {
  if (l < 0 || l > 3) throw std::invalid_argument("label " + std::to_string(l) + " outside 0-3");
}

void check_pair(std::span<const int> gold, std::span<const int> pred) {
  if (gold.size() != pred.size()) {
    throw std::invalid_argument("label vectors differ in length (" + std::to_string(gold.size()) +
                                " vs " + std::to_string(pred.size()) + ")");
  }
  if (gold.empty()) throw std::invalid_argument("label vectors are empty");
}

double kappa_weight(KappaWeighting w, int i, int j) {
  const double d = std::abs(i - j) / 3.0;
  switch (w) {
    case KappaWeighting::kUnweighted: return i == j ? 1.0 : 0.0;
    case KappaWeighting::kLinear: return 1.0 - d;
    case KappaWeighting::kQuadratic: return 1.0 - d * d;
  }
  return i == j ? 1.0 : 0.0;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::int64_t ConfusionMatrix::row_sum(int truth) const {
  std::int64_t s = 0;
  for (auto c : counts.at(static_cast<std::size_t>(truth))) s += c;
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int predicted) const {
  std::int64_t s = 0;
  for (const auto& row : counts) s += row.at(static_cast<std::size_t>(predicted));
  return s;
}

std::int64_t ConfusionMatrix::diagonal() const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < 4; ++i) s += counts[i][i];
  return s;
}

ConfusionMatrix confusion_matrix(const corpus::QrelsSet& gold, const corpus::QrelsSet& pred) {
  ConfusionMatrix m;
  for (const auto& [key, label] : gold.entries()) {
    if (auto p = pred.find(key.first, key.second)) {
      ++m.counts[static_cast<std::size_t>(label.value())][static_cast<std::size_t>(p->value())];
      ++m.n;
    }
  }
  if (m.n == 0) throw DataError("gold and predicted judgments share no (query, doc) pair");
  return m;
}

ConfusionMatrix confusion_from_labels(std::span<const int> gold, std::span<const int> pred) {
  check_pair(gold, pred);
  ConfusionMatrix m;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    check_label(gold[i]);
    check_label(pred[i]);
    ++m.counts[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(pred[i])];
  }
  m.n = static_cast<std::int64_t>(gold.size());
  return m;
}

ConfusionMatrix matrix_from_rows(const std::array<std::array<std::int64_t, 4>, 4>& rows) {
  ConfusionMatrix m;
  m.counts = rows;
  for (const auto& row : rows) {
    for (auto c : row) {
      if (c < 0) throw std::invalid_argument("negative confusion count");
      m.n += c;
    }
  }
  return m;
}

std::pair<std::vector<int>, std::vector<int>> realize_labels(const ConfusionMatrix& m) {
  std::pair<std::vector<int>, std::vector<int>> out;
  out.first.reserve(static_cast<std::size_t>(m.n));
  out.second.reserve(static_cast<std::size_t>(m.n));
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) {
      for (std::int64_t c = 0; c < m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]; ++c) {
        out.first.push_back(t);
        out.second.push_back(p);
      }
    }
  }
  return out;
}

std::array<std::optional<double>, 4> per_level_percentages(const ConfusionMatrix& m) {
  std::array<std::optional<double>, 4> out;
  for (int t = 0; t < 4; ++t) {
    const auto row = m.row_sum(t);
    if (row > 0) {
      out[static_cast<std::size_t>(t)] =
          100.0 * static_cast<double>(m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)]) /
          static_cast<double>(row);
    }
  }
  return out;
}

std::string format_percent(std::int64_t numerator, std::int64_t denominator,
                           PercentDisplay display) {
  if (denominator <= 0 || numerator < 0) return "-";
  const std::int64_t hundredths = display == PercentDisplay::kTruncate
                                      ? (numerator * 10000) / denominator
                                      : (numerator * 20000 + denominator) / (2 * denominator);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld.%02lld", static_cast<long long>(hundredths / 100),
                static_cast<long long>(hundredths % 100));
  return buf;
}

std::string format_stat(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

BinaryClass binary_class(int label) {
  check_label(label);
  return label >= 2 ? BinaryClass::kRelevant : BinaryClass::kIrrelevant;
}

std::int64_t BinaryConfusion::row_sum(BinaryClass truth) const {
  const auto& row = counts[static_cast<std::size_t>(truth)];
  return row[0] + row[1];
}

std::int64_t BinaryConfusion::n() const {
  return row_sum(BinaryClass::kIrrelevant) + row_sum(BinaryClass::kRelevant);
}

BinaryConfusion binary_collapse(const ConfusionMatrix& m) {
  BinaryConfusion b;
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) {
      b.counts[static_cast<std::size_t>(binary_class(t))][static_cast<std::size_t>(binary_class(p))] +=
          m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
  }
  return b;
}

BinaryConfusion binary_collapse(std::span<const int> gold, std::span<const int> pred) {
  return binary_collapse(confusion_from_labels(gold, pred));
}

std::array<std::optional<double>, 2> per_level_percentages(const BinaryConfusion& b) {
  std::array<std::optional<double>, 2> out;
  for (std::size_t t = 0; t < 2; ++t) {
    const auto row = b.counts[t][0] + b.counts[t][1];
    if (row > 0) out[t] = 100.0 * static_cast<double>(b.counts[t][t]) / static_cast<double>(row);
  }
  return out;
}

double cohen_kappa(const ConfusionMatrix& m, KappaWeighting weighting) {
  if (m.n <= 0) throw std::invalid_argument("cohen_kappa on an empty matrix");
  const double n = static_cast<double>(m.n);
  double po = 0.0;
  double pe = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double row = static_cast<double>(m.row_sum(i));
    for (int j = 0; j < 4; ++j) {
      const double w = kappa_weight(weighting, i, j);
      po += w * static_cast<double>(m.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      pe += w * row * static_cast<double>(m.col_sum(j));
    }
  }
  po /= n;
  pe /= n * n;
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

double cohen_kappa(std::span<const int> gold, std::span<const int> pred, KappaWeighting weighting) {
  return cohen_kappa(confusion_from_labels(gold, pred), weighting);
}

std::string alpha_level_name(AlphaLevel level) {
  switch (level) {
    case AlphaLevel::kNominal: return "nominal";
    case AlphaLevel::kOrdinal: return "ordinal";
    case AlphaLevel::kInterval: return "interval";
  }
  return "ordinal";
}

AlphaLevel parse_alpha_level(const std::string& name) {
  if (name == "nominal") return AlphaLevel::kNominal;
  if (name == "ordinal") return AlphaLevel::kOrdinal;
  if (name == "interval") return AlphaLevel::kInterval;
  throw ConfigError("unknown alpha level '" + name + "' (expected nominal, ordinal or interval)");
}

CoincidenceMatrix coincidences(const std::vector<std::vector<int>>& units) {
  CoincidenceMatrix o{};
  for (const auto& unit : units) {
    if (unit.size() < 2) continue;
    for (int v : unit) check_label(v);
    const double w = 1.0 / static_cast<double>(unit.size() - 1);
    for (std::size_t i = 0; i < unit.size(); ++i) {
      for (std::size_t j = 0; j < unit.size(); ++j) {
        if (i != j) o[static_cast<std::size_t>(unit[i])][static_cast<std::size_t>(unit[j])] += w;
      }
    }
  }
  return o;
}

CoincidenceMatrix coincidences(const ConfusionMatrix& m) {
  CoincidenceMatrix o{};
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t k = 0; k < 4; ++k) {
      o[c][k] = static_cast<double>(m.counts[c][k] + m.counts[k][c]);
    }
  }
  return o;
}

double alpha_distance(AlphaLevel level, int c, int k, const std::array<double, 4>& marginals) {
  switch (level) {
    case AlphaLevel::kNominal: return c == k ? 0.0 : 1.0;
    case AlphaLevel::kInterval: return static_cast<double>((c - k) * (c - k));
    case AlphaLevel::kOrdinal: {
      const int lo = std::min(c, k);
      const int hi = std::max(c, k);
      double s = 0.0;
      for (int g = lo; g <= hi; ++g) s += marginals[static_cast<std::size_t>(g)];
      s -= (marginals[static_cast<std::size_t>(c)] + marginals[static_cast<std::size_t>(k)]) / 2.0;
      return s * s;
    }
  }
  return 0.0;
}

AlphaComponents alpha_components(const CoincidenceMatrix& o, AlphaLevel level) {
  std::array<double, 4> marginals{};
  double n = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t k = 0; k < 4; ++k) marginals[c] += o[c][k];
    n += marginals[c];
  }
  AlphaComponents out;
  if (n <= 1.0) return out;
  for (int c = 0; c < 4; ++c) {
    for (int k = 0; k < 4; ++k) {
      const double d = alpha_distance(level, c, k, marginals);
      out.observed += o[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] * d;
      out.expected += marginals[static_cast<std::size_t>(c)] * marginals[static_cast<std::size_t>(k)] * d;
    }
  }
  out.observed /= n;
  out.expected /= n * (n - 1.0);
  if (out.expected > 0.0) {
    out.alpha = 1.0 - out.observed / out.expected;
  } else if (out.observed == 0.0) {
    out.alpha = 1.0;
  }
  return out;
}

std::optional<double> krippendorff_alpha(std::span<const int> gold, std::span<const int> pred,
                                         AlphaLevel level) {
  return krippendorff_alpha(confusion_from_labels(gold, pred), level);
}

std::optional<double> krippendorff_alpha(const ConfusionMatrix& m, AlphaLevel level) {
  return alpha_components(coincidences(m), level).alpha;
}

std::optional<double> krippendorff_alpha(const std::vector<std::vector<int>>& units,
                                         AlphaLevel level) {
  return alpha_components(coincidences(units), level).alpha;
}

AgreementReport agreement_report(const ConfusionMatrix& m, AlphaLevel level) {
  AgreementReport r;
  r.matrix = m;
  r.kappa = cohen_kappa(m);
  r.alpha_level = level;
  r.alpha = krippendorff_alpha(m, level);
  r.per_level_pct = per_level_percentages(m);
  r.binary = binary_collapse(m);
  r.binary_pct = per_level_percentages(r.binary);
  return r;
}

AgreementReport agreement_report(const corpus::QrelsSet& gold, const corpus::QrelsSet& pred,
                                 AlphaLevel level) {
  AgreementReport r = agreement_report(confusion_matrix(gold, pred), level);
  for (const auto& [key, label] : gold.entries()) {
    if (!pred.contains(key)) ++r.gold_only;
  }
  for (const auto& [key, label] : pred.entries()) {
    if (!gold.contains(key)) ++r.pred_only;
  }
  return r;
}

std::string to_json(const AgreementReport& r, int indent) {
  json counts = json::array();
  json pct = json::object();
  json pct_display = json::object();
  for (int t = 0; t < 4; ++t) {
    counts.push_back(r.matrix.counts[static_cast<std::size_t>(t)]);
    pct[std::to_string(t)] = optional_json(r.per_level_pct[static_cast<std::size_t>(t)]);
    pct_display[std::to_string(t)] =
        format_percent(r.matrix.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)],
                       r.matrix.row_sum(t));
  }
  json bcounts = json::array();
  json bpct = json::object();
  json bpct_display = json::object();
  const std::array<const char*, 2> bnames = {"irrelevant", "relevant"};
  for (std::size_t t = 0; t < 2; ++t) {
    bcounts.push_back(r.binary.counts[t]);
    bpct[bnames[t]] = optional_json(r.binary_pct[t]);
    bpct_display[bnames[t]] =
        format_percent(r.binary.counts[t][t], r.binary.row_sum(static_cast<BinaryClass>(t)));
  }
  json doc = {{"n", r.matrix.n},
              {"gold_only", r.gold_only},
              {"predicted_only", r.pred_only},
              {"kappa", r.kappa},
              {"alpha", optional_json(r.alpha)},
              {"alpha_level", alpha_level_name(r.alpha_level)},
              {"confusion", counts},
              {"per_level_pct", pct},
              {"per_level_pct_display", pct_display},
              {"binary", {{"counts", bcounts}, {"pct", bpct}, {"pct_display", bpct_display}}}};
  return doc.dump(indent) + "\n";
}

std::string to_text(const AgreementReport& r) {
  std::ostringstream out;
  out << "pairs compared   " << r.matrix.n << "  (gold only " << r.gold_only
      << ", predicted only " << r.pred_only << ")\n";
  out << "Cohen's kappa    " << format_stat(r.kappa) << "\n";
  out << "Krippendorff's a " << (r.alpha ? format_stat(*r.alpha) : std::string("undefined"))
      << "  (" << alpha_level_name(r.alpha_level) << ")\n\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %11s %11s %11s %11s %9s\n", "truth\\pred", kLevelNames[0],
                kLevelNames[1], kLevelNames[2], kLevelNames[3], "%");
  out << buf;
  for (int t = 3; t >= 0; --t) {
    const auto& row = r.matrix.counts[static_cast<std::size_t>(t)];
    std::snprintf(buf, sizeof(buf), "%-12s %11lld %11lld %11lld %11lld %9s\n",
                  kLevelNames[static_cast<std::size_t>(t)], static_cast<long long>(row[0]),
                  static_cast<long long>(row[1]), static_cast<long long>(row[2]),
                  static_cast<long long>(row[3]),
                  format_percent(row[static_cast<std::size_t>(t)], r.matrix.row_sum(t)).c_str());
    out << buf;
  }
  out << "\n";
  std::snprintf(buf, sizeof(buf), "%-12s %11s %11s %9s\n", "truth\\pred", "Irrelevant", "Relevant",
                "%");
  out << buf;
  for (int t = 1; t >= 0; --t) {
    const auto& row = r.binary.counts[static_cast<std::size_t>(t)];
    std::snprintf(buf, sizeof(buf), "%-12s %11lld %11lld %9s\n", t == 1 ? "Relevant" : "Irrelevant",
                  static_cast<long long>(row[0]), static_cast<long long>(row[1]),
                  format_percent(row[static_cast<std::size_t>(t)],
                                 r.binary.row_sum(static_cast<BinaryClass>(t)))
                      .c_str());
    out << buf;
  }
  return out.str();
}

std::string to_csv(const ConfusionMatrix& m) {
  std::string out = "truth,pred_0,pred_1,pred_2,pred_3\n";
  for (std::size_t t = 0; t < 4; ++t) {
    out += std::to_string(t);
    for (auto c : m.counts[t]) out += "," + std::to_string(c);
    out += '\n';
  }
  return out;
}

std::string to_csv(const BinaryConfusion& b) {
  std::string out = "truth,pred_irrelevant,pred_relevant\n";
  const std::array<const char*, 2> names = {"irrelevant", "relevant"};
  for (std::size_t t = 0; t < 2; ++t) {
    out += std::string(names[t]) + "," + std::to_string(b.counts[t][0]) + "," +
           std::to_string(b.counts[t][1]) + "\n";
  }
  return out;
}

}  // namespace judgeblender::metrics
