#pragma once

// Meta-evaluation statistics: label agreement against gold judgments and
// ranking measures for system comparison.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "judgeblender/corpus_io.hpp"

namespace judgeblender::metrics {

// counts[truth][predicted] on the 0-3 scale.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, 4>, 4> counts{};
  std::int64_t n = 0;

  std::int64_t row_sum(int truth) const;
  std::int64_t col_sum(int predicted) const;
  std::int64_t diagonal() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Over the key intersection. Throws DataError when the intersection is empty.
ConfusionMatrix confusion_matrix(const corpus::QrelsSet& gold, const corpus::QrelsSet& pred);
// Throws std::invalid_argument on length mismatch, empty input or labels
// outside 0-3.
ConfusionMatrix confusion_from_labels(std::span<const int> gold, std::span<const int> pred);
// Rows are truth labels. n is derived.
ConfusionMatrix matrix_from_rows(const std::array<std::array<std::int64_t, 4>, 4>& rows);

// Label vectors (truth, predicted) realizing the matrix, in row-major order.
std::pair<std::vector<int>, std::vector<int>> realize_labels(const ConfusionMatrix& m);

// Diagonal over row sum in percent; absent for empty rows.
std::array<std::optional<double>, 4> per_level_percentages(const ConfusionMatrix& m);

enum class PercentDisplay {
  kTruncate,  // the convention of the published agreement tables
  kNearest,   // round half up
};

// Two-decimal percentage of numerator/denominator computed in integer
// arithmetic, e.g. "73.76".
std::string format_percent(std::int64_t numerator, std::int64_t denominator,
                           PercentDisplay display = PercentDisplay::kTruncate);
// Four decimals, e.g. "0.2553".
std::string format_stat(double value);

enum class BinaryClass { kIrrelevant = 0, kRelevant = 1 };

// {0,1} -> irrelevant, {2,3} -> relevant.
BinaryClass binary_class(int label);

// counts[truth][predicted] over {irrelevant, relevant}.
struct BinaryConfusion {
  std::array<std::array<std::int64_t, 2>, 2> counts{};

  std::int64_t row_sum(BinaryClass truth) const;
  std::int64_t n() const;

  friend bool operator==(const BinaryConfusion&, const BinaryConfusion&) = default;
};

BinaryConfusion binary_collapse(const ConfusionMatrix& m);
BinaryConfusion binary_collapse(std::span<const int> gold, std::span<const int> pred);
std::array<std::optional<double>, 2> per_level_percentages(const BinaryConfusion& b);

enum class KappaWeighting { kUnweighted, kLinear, kQuadratic };

// Throws std::invalid_argument on length mismatch or empty input.
double cohen_kappa(std::span<const int> gold, std::span<const int> pred,
                   KappaWeighting weighting = KappaWeighting::kUnweighted);
double cohen_kappa(const ConfusionMatrix& m,
                   KappaWeighting weighting = KappaWeighting::kUnweighted);

enum class AlphaLevel { kNominal, kOrdinal, kInterval };

std::string alpha_level_name(AlphaLevel level);
AlphaLevel parse_alpha_level(const std::string& name);

using CoincidenceMatrix = std::array<std::array<double, 4>, 4>;

struct AlphaComponents {
  double observed = 0.0;  // D_o
  double expected = 0.0;  // D_e
  std::optional<double> alpha;
};

// Coincidence matrix of units, each unit holding the values assigned to it
// (units with fewer than two values are not pairable and are skipped).
CoincidenceMatrix coincidences(const std::vector<std::vector<int>>& units);
// Two raters, no missing data: o = C + C^T.
CoincidenceMatrix coincidences(const ConfusionMatrix& m);

double alpha_distance(AlphaLevel level, int c, int k, const std::array<double, 4>& marginals);
AlphaComponents alpha_components(const CoincidenceMatrix& o, AlphaLevel level);

// Absent when expected disagreement is zero but observed is not.
std::optional<double> krippendorff_alpha(std::span<const int> gold, std::span<const int> pred,
                                         AlphaLevel level = AlphaLevel::kOrdinal);
std::optional<double> krippendorff_alpha(const ConfusionMatrix& m,
                                         AlphaLevel level = AlphaLevel::kOrdinal);
std::optional<double> krippendorff_alpha(const std::vector<std::vector<int>>& units,
                                         AlphaLevel level = AlphaLevel::kOrdinal);

struct AgreementReport {
  double kappa = 0.0;
  std::optional<double> alpha;
  AlphaLevel alpha_level = AlphaLevel::kOrdinal;
  ConfusionMatrix matrix;
  std::array<std::optional<double>, 4> per_level_pct;
  BinaryConfusion binary;
  std::array<std::optional<double>, 2> binary_pct;
  std::size_t gold_only = 0;  // gold pairs without a prediction
  std::size_t pred_only = 0;
};

AgreementReport agreement_report(const corpus::QrelsSet& gold, const corpus::QrelsSet& pred,
                                 AlphaLevel level = AlphaLevel::kOrdinal);
AgreementReport agreement_report(const ConfusionMatrix& m,
                                 AlphaLevel level = AlphaLevel::kOrdinal);

std::string to_json(const AgreementReport& report, int indent = 2);
std::string to_text(const AgreementReport& report);
std::string to_csv(const ConfusionMatrix& m);
std::string to_csv(const BinaryConfusion& b);

// --- ranking measures ---

enum class Gain { kLinear, kExponential };

// DCG@k over `ranking` with gains from `labels` (unjudged = 0), normalized by
// the ideal DCG of the judged labels. 0 when no positive label exists.
double ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>& labels,
                 int k, Gain gain = Gain::kLinear);

// Mean precision at each relevant retrieved rank, divided by the number of
// relevant documents in `labels`. Absent when there are none.
std::optional<double> average_precision(std::span<const std::string> ranking,
                                        const std::map<std::string, int>& labels,
                                        int relevance_threshold = 2);

// Tau-b, computed in O(n log n). Absent if either side is constant.
// Throws std::invalid_argument on length mismatch or n < 2.
std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks. Absent on zero rank variance.
std::optional<double> spearman_rho(std::span<const double> x, std::span<const double> y);
// Fractional (average) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace judgeblender::metrics
