#include "lsidn/experiments.hpp"

#include <cmath>
#include <stdexcept>

#include "lsidn/checkpoint.hpp"

namespace lsidn {

namespace {

std::vector<MetricRow> metric_rows(const MetricReport& test, double best_val_auc,
                                   const ExperimentConfig& cfg) {
  const std::string variant = variant_token(cfg.variant);
  std::vector<MetricRow> rows;
  rows.push_back({"auc", best_val_auc, "val", variant, cfg.seed, {}});
  rows.push_back({"auc", test.auc, "test", variant, cfg.seed, {}});
  rows.push_back({"gauc", test.gauc, "test", variant, cfg.seed, {}});
  rows.push_back({"mrr", test.mrr, "test", variant, cfg.seed, {}});
  rows.push_back({"ndcg@5", test.ndcg5, "test", variant, cfg.seed, {}});
  rows.push_back({"ndcg@10", test.ndcg10, "test", variant, cfg.seed, {}});
  return rows;
}

}  // namespace

RunOutput run_single(const ExperimentConfig& cfg, const ParsedEvents& events) {
  Dataset ds = build_dataset(events, cfg);
  if (cfg.noise_rate > 0.0) {
    Rng noise_rng(derive_seed(cfg.seed, "noise"));
    inject_noise(ds.split.train, cfg.noise_rate, ds, noise_rng);
    inject_noise(ds.split.val, cfg.noise_rate, ds, noise_rng);
  }

  LsidnModel model(cfg, ds.n_items(), ds.n_categories(), ds.vocab.item_category);
  RunOutput out;
  out.training = train_model(model, ds);

  const auto pools = build_eval_pools(ds, ds.split.test, cfg.eval_negatives,
                                      derive_seed(cfg.seed, "test"));
  out.test = evaluate_pools(score_pools(model, ds.split.test, pools));
  out.rows = metric_rows(out.test, out.training.best_val_auc, cfg);
  return out;
}

std::vector<MetricRow> run_ablation(const ExperimentConfig& base,
                                    const ParsedEvents& events,
                                    const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
  std::vector<MetricRow> rows;
  for (Variant variant : all_variants()) {
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = base;
      cfg.variant = variant;
      cfg.seed = seed;
      auto out = run_single(cfg, events);
      rows.insert(rows.end(), out.rows.begin(), out.rows.end());
    }
  }
  return rows;
}

std::vector<MetricRow> run_robustness(const ExperimentConfig& base,
                                      const ParsedEvents& events,
                                      const std::vector<double>& rates) {
  if (rates.empty() || rates.front() != 0.0)
    throw std::invalid_argument("run_robustness: rates must start at 0");

  struct Cell {
    Variant variant;
    AugmentKind augmentation;
  };
  const std::vector<Cell> cells = {
      {Variant::kFull, AugmentKind::kExchange}, {Variant::kFull, AugmentKind::kCrop},
      {Variant::kFull, AugmentKind::kMask},     {Variant::kFull, AugmentKind::kReorder},
      {Variant::kWoSd, AugmentKind::kExchange},
  };

  std::vector<MetricRow> rows;
  for (const Cell& cell : cells) {
    double baseline_auc = 0.0;
    for (double rate : rates) {
      ExperimentConfig cfg = base;
      cfg.variant = cell.variant;
      cfg.augmentation = cell.augmentation;
      cfg.noise_rate = rate;
      auto out = run_single(cfg, events);
      if (rate == 0.0) baseline_auc = out.test.auc;

      const std::vector<std::pair<std::string, std::string>> extra = {
          {"rate", format_double(rate)},
          {"augmentation", augment_token(cell.augmentation)},
      };
      const std::string variant = variant_token(cell.variant);
      rows.push_back({"auc", out.test.auc, "test", variant, cfg.seed, extra});
      rows.push_back({"gauc", out.test.gauc, "test", variant, cfg.seed, extra});
      rows.push_back({"auc_drop", (baseline_auc - out.test.auc) / baseline_auc, "test",
                      variant, cfg.seed, extra});
    }
  }
  return rows;
}

std::vector<MetricRow> run_sweep(const ExperimentConfig& base, const ParsedEvents& events,
                                 const std::string& param,
                                 const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("run_sweep: no values");
  std::vector<MetricRow> rows;
  for (double value : values) {
    ExperimentConfig cfg = base;
    if (param == "tau") {
      cfg.tau = value;
    } else if (param == "lambda") {
      cfg.lambda = value;
    } else if (param == "omega") {
      if (value <= 0.0 || value != std::floor(value))
        throw std::invalid_argument("run_sweep: omega must be a positive whole number of minutes");
      cfg.omega_minutes = static_cast<int>(value);
    } else {
      throw std::invalid_argument("run_sweep: unknown parameter '" + param + "'");
    }
    auto out = run_single(cfg, events);
    for (MetricRow& row : out.rows) {
      row.extra.emplace_back(param, format_double(value));
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace lsidn
