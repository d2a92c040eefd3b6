#include "lsidn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace lsidn {

int RankedPool::rank() const {
  int r = 1;
  for (double s : negative_scores)
    if (s >= positive_score) ++r;
  return r;
}

double auc(const std::vector<std::pair<double, int>>& scored) {
  std::size_t positives = 0;
  for (const auto& [score, label] : scored) {
    (void)score;
    if (label != 0 && label != 1) throw std::invalid_argument("auc: labels must be 0/1");
    positives += static_cast<std::size_t>(label);
  }
  const std::size_t negatives = scored.size() - positives;
  if (positives == 0 || negatives == 0)
    throw std::invalid_argument("auc: need both classes");

  // rank-sum form; average ranks inside tie runs give the half-credit rule
  std::vector<std::pair<double, int>> sorted = scored;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    std::size_t tied_pos = 0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      tied_pos += static_cast<std::size_t>(sorted[j].second);
      ++j;
    }
    const double mean_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    pos_rank_sum += mean_rank * static_cast<double>(tied_pos);
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

namespace {

std::vector<std::pair<double, int>> flatten(const std::vector<RankedPool>& pools) {
  std::vector<std::pair<double, int>> out;
  for (const auto& pool : pools) {
    out.emplace_back(pool.positive_score, 1);
    for (double s : pool.negative_scores) out.emplace_back(s, 0);
  }
  return out;
}

}  // namespace

double auc(const std::vector<RankedPool>& pools) { return auc(flatten(pools)); }

double gauc(const std::vector<RankedPool>& pools) {
  std::map<int, std::vector<RankedPool>> by_user;
  for (const auto& pool : pools) by_user[pool.user].push_back(pool);
  double weighted = 0.0, weight = 0.0;
  for (const auto& [user, user_pools] : by_user) {
    (void)user;
    auto flat = flatten(user_pools);
    bool has_pos = false, has_neg = false;
    for (const auto& [s, label] : flat) {
      (void)s;
      (label ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    const double w = static_cast<double>(user_pools.size());
    weighted += w * auc(flat);
    weight += w;
  }
  if (weight == 0.0) throw std::invalid_argument("gauc: no user with a computable auc");
  return weighted / weight;
}

double mrr(const std::vector<RankedPool>& pools) {
  if (pools.empty()) throw std::invalid_argument("mrr: no pools");
  double total = 0.0;
  for (const auto& pool : pools) total += 1.0 / static_cast<double>(pool.rank());
  return total / static_cast<double>(pools.size());
}

double ndcg_at_k(const std::vector<RankedPool>& pools, int k) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
  if (pools.empty()) throw std::invalid_argument("ndcg_at_k: no pools");
  double total = 0.0;
  for (const auto& pool : pools) {
    const int rank = pool.rank();
    if (rank <= k) total += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
  }
  return total / static_cast<double>(pools.size());
}

MetricReport evaluate_pools(const std::vector<RankedPool>& pools) {
  MetricReport report;
  report.auc = auc(pools);
  report.gauc = gauc(pools);
  report.mrr = mrr(pools);
  report.ndcg5 = ndcg_at_k(pools, 5);
  report.ndcg10 = ndcg_at_k(pools, 10);
  report.pools = pools.size();
  return report;
}

std::vector<RankedPool> score_pools(const LsidnModel& model,
                                    const std::vector<TrainingInstance>& instances,
                                    const std::vector<std::vector<int>>& candidates) {
  EvalScores scored = model.score_candidates(instances, candidates);
  std::vector<RankedPool> pools(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    pools[i].user = instances[i].user;
    pools[i].positive_score = scored.scores[i].front();
    pools[i].negative_scores.assign(scored.scores[i].begin() + 1, scored.scores[i].end());
  }
  return pools;
}

std::vector<AlphaGroup> alpha_split_analysis(const LsidnModel& model,
                                             const std::vector<TrainingInstance>& instances) {
  if (instances.empty())
    throw std::invalid_argument("alpha_split_analysis: no instances");
  std::vector<std::vector<int>> candidates(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i)
    candidates[i] = {instances[i].target.item};
  EvalScores scored = model.score_candidates(instances, candidates);

  std::map<Behavior, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto& slot = acc[instances[i].target.behavior];
    slot.first += scored.alphas[i].front();
    slot.second += 1;
  }
  std::vector<AlphaGroup> out;
  for (const auto& [behavior, sums] : acc)
    out.push_back({behavior, sums.first / static_cast<double>(sums.second), sums.second});
  return out;
}

}  // namespace lsidn
