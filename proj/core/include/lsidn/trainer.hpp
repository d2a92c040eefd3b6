#pragma once

#include <vector>

#include "lsidn/dataset.hpp"
#include "lsidn/model.hpp"

namespace lsidn {

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double main = 0.0;
  double ssl = 0.0;
  double reg = 0.0;
  double val_auc = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_val_auc = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

// Mini-batch training with early stopping on validation AUC. The model keeps
// the best-validation parameters when this returns. Throws on empty train or
// val splits and aborts on a non-finite loss.
TrainResult train_model(LsidnModel& model, const Dataset& ds);

}  // namespace lsidn
