#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cir {

// Mean over positive positions of precision at that position. nullopt when
// there are no positives (AP is undefined).
std::optional<double> average_precision(const std::vector<bool>& ranked_labels);

// Data error when a ranked id has no label.
std::optional<double> average_precision(const std::vector<std::string>& ranking,
                                        const std::map<std::string, bool>& labels);

// DCG with a log2(position + 1) discount over 1-based positions, divided by
// the DCG of the relevance-sorted order. nullopt when all relevance is zero.
std::optional<double> ndcg(const std::vector<double>& ranked_relevance);
std::optional<double> ndcg(const std::vector<std::string>& ranking,
                           const std::map<std::string, double>& relevance);

// accuracy + reasonableness + 2, so that relevance is non-negative.
inline double graded_relevance(double accuracy, double reasonableness) {
  return accuracy + reasonableness + 2.0;
}

// Percentage of queries whose target is within the top k.
double recall_at_k(const std::vector<std::vector<std::string>>& rankings,
                   const std::vector<std::string>& targets, std::size_t k);

struct CategoryRecall {
  std::string category;
  double r10 = 0.0;
  double r50 = 0.0;
};

// Arithmetic mean of every R@10 and R@50 value.
double fiq_score(const std::vector<CategoryRecall>& categories);

}  // namespace cir
