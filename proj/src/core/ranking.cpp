#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "judgeblender/metrics.hpp"

namespace judgeblender::metrics {

namespace {

double gain_of(int label, Gain gain) {
  if (label <= 0) return 0.0;
  return gain == Gain::kLinear ? static_cast<double>(label) : std::exp2(label) - 1.0;
}

void check_vectors(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("score vectors differ in length");
  if (x.size() < 2) throw std::invalid_argument("rank correlation needs at least two systems");
}

// Number of tied pairs within runs of equal values in a sorted sequence.
template <typename It, typename Eq>
std::int64_t tied_pairs(It first, It last, Eq eq) {
  std::int64_t ties = 0;
  while (first != last) {
    It run_end = first + 1;
    while (run_end != last && eq(*first, *run_end)) ++run_end;
    const std::int64_t len = run_end - first;
    ties += len * (len - 1) / 2;
    first = run_end;
  }
  return ties;
}

// Sorts `v` ascending and returns the number of inversions.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>& labels,
                 int k, Gain gain) {
  if (k < 1) throw std::invalid_argument("ndcg cutoff must be >= 1");
  const std::size_t cutoff = static_cast<std::size_t>(k);
  double dcg = 0.0;
  for (std::size_t i = 0; i < ranking.size() && i < cutoff; ++i) {
    auto it = labels.find(ranking[i]);
    if (it != labels.end()) dcg += gain_of(it->second, gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> ideal;
  ideal.reserve(labels.size());
  for (const auto& [doc, label] : labels) ideal.push_back(label);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal.size() && i < cutoff; ++i) {
    idcg += gain_of(ideal[i], gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

std::optional<double> average_precision(std::span<const std::string> ranking,
                                        const std::map<std::string, int>& labels,
                                        int relevance_threshold) {
  std::size_t total_relevant = 0;
  for (const auto& [doc, label] : labels) {
    if (label >= relevance_threshold) ++total_relevant;
  }
  if (total_relevant == 0) return std::nullopt;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    auto it = labels.find(ranking[i]);
    if (it != labels.end() && it->second >= relevance_threshold) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(total_relevant);
}

std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y) {
  check_vectors(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];

  const std::int64_t ties_x = tied_pairs(order.begin(), order.end(),
                                         [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  const std::int64_t ties_xy = tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] == x[b] && y[a] == y[b];
  });
  std::vector<double> buf(n);
  const std::int64_t swaps = merge_count(ys, buf, 0, n);
  const std::int64_t ties_y =
      tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });

  const std::int64_t n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
  const double denom = std::sqrt(static_cast<double>(n0 - ties_x) * static_cast<double>(n0 - ties_y));
  if (denom == 0.0) return std::nullopt;
  const double numer = static_cast<double>(n0 - ties_x - ties_y + ties_xy - 2 * swaps);
  return std::clamp(numer / denom, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

std::optional<double> spearman_rho(std::span<const double> x, std::span<const double> y) {
  check_vectors(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace judgeblender::metrics
