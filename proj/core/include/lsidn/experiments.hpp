#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsidn/dataset.hpp"
#include "lsidn/evaluation.hpp"
#include "lsidn/report.hpp"
#include "lsidn/trainer.hpp"

namespace lsidn {

struct RunOutput {
  std::vector<MetricRow> rows;  // val auc + test auc/gauc/mrr/ndcg@5/ndcg@10
  MetricReport test;
  TrainResult training;
};

// Builds the dataset for cfg (injecting train/val noise when noise_rate > 0),
// trains one model, evaluates on the held-out test sessions.
RunOutput run_single(const ExperimentConfig& cfg, const ParsedEvents& events);

// One train/eval per variant per seed, shared data and seeds across variants.
std::vector<MetricRow> run_ablation(const ExperimentConfig& base,
                                    const ParsedEvents& events,
                                    const std::vector<std::uint64_t>& seeds);

// Trains the full model with each augmentation kind plus the no-contrastive
// variant at every rate; emits metric rows and drop rates relative to the
// rate-0 cell. rates must start at 0.
std::vector<MetricRow> run_robustness(const ExperimentConfig& base,
                                      const ParsedEvents& events,
                                      const std::vector<double>& rates);

// param is one of "tau", "lambda", "omega" (omega in minutes).
std::vector<MetricRow> run_sweep(const ExperimentConfig& base, const ParsedEvents& events,
                                 const std::string& param,
                                 const std::vector<double>& values);

}  // namespace lsidn
