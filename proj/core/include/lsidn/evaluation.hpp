#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lsidn/data_model.hpp"
#include "lsidn/model.hpp"

namespace lsidn {

// One evaluation pool: the target's score against sampled negatives. Ranks are
// 1-based and pessimistic: the positive sits after every equal-scored negative.
struct RankedPool {
  int user = 0;
  double positive_score = 0.0;
  std::vector<double> negative_scores;

  int rank() const;
};

// Mann-Whitney AUC over a flat (score, label) collection; ties count half.
// Needs at least one of each class.
double auc(const std::vector<std::pair<double, int>>& scored);
double auc(const std::vector<RankedPool>& pools);

// Per-user AUC averaged with instance-count weights; users whose pools hold a
// single class are skipped. Throws when nobody is computable.
double gauc(const std::vector<RankedPool>& pools);

double mrr(const std::vector<RankedPool>& pools);
double ndcg_at_k(const std::vector<RankedPool>& pools, int k);

struct MetricReport {
  double auc = 0.0;
  double gauc = 0.0;
  double mrr = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  std::size_t pools = 0;
};
MetricReport evaluate_pools(const std::vector<RankedPool>& pools);

// Scores candidates[i] (positive first) for each instance and folds the
// results into pools. Candidate lists must share one size.
std::vector<RankedPool> score_pools(const LsidnModel& model,
                                    const std::vector<TrainingInstance>& instances,
                                    const std::vector<std::vector<int>>& candidates);

// Mean fusion gate per target behavior type, collected from deterministic
// single-candidate forwards. Behaviors absent from `instances` are omitted.
struct AlphaGroup {
  Behavior behavior = Behavior::kClick;
  double mean_alpha = 0.0;
  std::size_t count = 0;
};
std::vector<AlphaGroup> alpha_split_analysis(const LsidnModel& model,
                                             const std::vector<TrainingInstance>& instances);

}  // namespace lsidn
