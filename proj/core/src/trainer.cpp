#include "lsidn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lsidn/evaluation.hpp"
#include "lsidn/optimizer.hpp"

namespace lsidn {

TrainResult train_model(LsidnModel& model, const Dataset& ds) {
  const ExperimentConfig& cfg = model.config();
  const auto& train = ds.split.train;
  const auto& val = ds.split.val;
  if (train.empty()) throw std::runtime_error("train: empty train split");
  if (val.empty()) throw std::runtime_error("train: empty validation split");

  const auto val_pools =
      build_eval_pools(ds, val, cfg.eval_negatives, derive_seed(cfg.seed, "val"));

  std::vector<Parameter> active = model.active_params();
  Adam opt(&active, cfg.lr);
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng neg_rng(derive_seed(cfg.seed, "negsample"));
  Rng aug_rng(derive_seed(cfg.seed, "augment"));

  auto snapshot = [&model] {
    std::vector<std::vector<double>> values;
    for (const auto& p : model.all_params()) values.push_back(p.tensor.values());
    return values;
  };

  TrainResult result;
  result.best_val_auc = -1.0;
  std::vector<std::vector<double>> best;
  int since_improved = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch_size = static_cast<std::size_t>(cfg.batch);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0, main_sum = 0.0, reg_sum = 0.0, ssl_sum = 0.0;
    std::size_t seen = 0, ssl_seen = 0;
    for (std::size_t at = 0; at < order.size();) {
      std::size_t hi = std::min(at + batch_size, order.size());
      // a singleton tail cannot provide an in-batch negative; fold it in
      if (cfg.n_scored > 1 && order.size() - hi == 1) hi = order.size();

      std::vector<TrainingInstance> batch;
      batch.reserve(hi - at);
      for (std::size_t k = at; k < hi; ++k) batch.push_back(train[order[k]]);
      sample_in_batch_negatives(batch, std::size_t(cfg.n_scored), neg_rng);

      ForwardResult fwd = model.forward_batch(batch, aug_rng);
      if (!std::isfinite(fwd.bundle.total))
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch starting at " +
                                 std::to_string(at));
      backward(fwd.total);
      opt.step();

      const double w = static_cast<double>(batch.size());
      loss_sum += w * fwd.bundle.total;
      main_sum += w * fwd.bundle.main;
      reg_sum += w * fwd.bundle.reg;
      seen += batch.size();
      if (fwd.bundle.has_ssl) {
        ssl_sum += w * fwd.bundle.ssl;
        ssl_seen += batch.size();
      }
      at = hi;
    }

    const double val_auc = auc(score_pools(model, val, val_pools));
    if (!std::isfinite(val_auc))
      throw std::runtime_error("train: non-finite validation AUC at epoch " +
                               std::to_string(epoch));

    EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.main = main_sum / static_cast<double>(seen);
    row.ssl = ssl_seen ? ssl_sum / static_cast<double>(ssl_seen) : 0.0;
    row.reg = reg_sum / static_cast<double>(seen);
    row.val_auc = val_auc;
    row.improved = val_auc > result.best_val_auc;
    result.log.push_back(row);
    result.epochs_run = epoch;

    if (row.improved) {
      result.best_val_auc = val_auc;
      result.best_epoch = epoch;
      best = snapshot();
      since_improved = 0;
    } else if (++since_improved >= cfg.patience) {
      break;
    }
  }

  auto& params = model.all_params();
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i].tensor.mutable_values() = best[i];
  return result;
}

}  // namespace lsidn
