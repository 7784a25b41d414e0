#include "cir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cir/error.hpp"

namespace cir {

std::optional<double> average_precision(const std::vector<bool>& ranked_labels) {
  double hits = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < ranked_labels.size(); ++i) {
    if (!ranked_labels[i]) continue;
    hits += 1.0;
    sum += hits / static_cast<double>(i + 1);
  }
  if (hits == 0.0) return std::nullopt;
  return sum / hits;
}

std::optional<double> average_precision(const std::vector<std::string>& ranking,
                                        const std::map<std::string, bool>& labels) {
  std::vector<bool> ranked;
  ranked.reserve(ranking.size());
  for (const auto& id : ranking) {
    auto it = labels.find(id);
    if (it == labels.end()) fail(ErrorKind::kData, "ranked id '" + id + "' has no label");
    ranked.push_back(it->second);
  }
  return average_precision(ranked);
}

namespace {
double dcg(const std::vector<double>& rel) {
  double s = 0.0;
  for (std::size_t j = 0; j < rel.size(); ++j) {
    s += rel[j] / std::log2(static_cast<double>(j) + 2.0);
  }
  return s;
}
}  // namespace

std::optional<double> ndcg(const std::vector<double>& ranked_relevance) {
  for (double r : ranked_relevance) {
    require(r >= 0.0, ErrorKind::kContract, "nDCG relevance must be non-negative");
  }
  std::vector<double> ideal = ranked_relevance;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double best = dcg(ideal);
  if (best == 0.0) return std::nullopt;
  return dcg(ranked_relevance) / best;
}

std::optional<double> ndcg(const std::vector<std::string>& ranking,
                           const std::map<std::string, double>& relevance) {
  std::vector<double> ranked;
  ranked.reserve(ranking.size());
  for (const auto& id : ranking) {
    auto it = relevance.find(id);
    if (it == relevance.end()) fail(ErrorKind::kData, "ranked id '" + id + "' has no relevance");
    ranked.push_back(it->second);
  }
  return ndcg(ranked);
}

double recall_at_k(const std::vector<std::vector<std::string>>& rankings,
                   const std::vector<std::string>& targets, std::size_t k) {
  require(rankings.size() == targets.size(), ErrorKind::kDimension,
          "one target per ranking required");
  require(!rankings.empty(), ErrorKind::kData, "recall over zero queries");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto& r = rankings[q];
    require(std::find(r.begin(), r.end(), targets[q]) != r.end(), ErrorKind::kData,
            "target '" + targets[q] + "' is not in the catalog");
    const auto top = r.begin() + static_cast<std::ptrdiff_t>(std::min(k, r.size()));
    if (std::find(r.begin(), top, targets[q]) != top) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double fiq_score(const std::vector<CategoryRecall>& categories) {
  require(!categories.empty(), ErrorKind::kData, "FIQ score needs at least one category");
  double sum = 0.0;
  for (const auto& c : categories) sum += c.r10 + c.r50;
  return sum / (2.0 * static_cast<double>(categories.size()));
}

}  // namespace cir
