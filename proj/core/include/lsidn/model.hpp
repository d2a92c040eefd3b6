#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lsidn/augmentation.hpp"
#include "lsidn/config.hpp"
#include "lsidn/data_model.hpp"
#include "lsidn/encoders.hpp"
#include "lsidn/tensor.hpp"

namespace lsidn {

// --- fusion and prediction -----------------------------------------------------

struct FusionParams {
  Tensor w;  // 5d x 1
  Tensor b;  // 1 x 1
};

struct MlpParams {
  Tensor w1, b1;  // 3d x 2d, 1 x 2d
  Tensor w2, b2;  // 2d x 1, 1 x 1
};

// alpha = sigmoid(concat(u_long, u_short, target) w + b), row-wise;
// fused = alpha * u_long + (1 - alpha) * u_short.
struct Fused {
  Tensor alpha;  // m x 1
  Tensor fused;  // m x 2d
};
Fused adaptive_fuse(const Tensor& u_long, const Tensor& u_short, const Tensor& target,
                    const FusionParams& p);

// Two-layer MLP (hidden 2d, ReLU) + sigmoid over concat(fused, target).
Tensor predict(const Tensor& fused, const Tensor& target, const MlpParams& p);

// --- losses ---------------------------------------------------------------------

// Mean negative log-likelihood with predictions clamped to [1e-12, 1-1e-12].
double main_loss(const std::vector<double>& y_hat, const std::vector<int>& labels);
Tensor main_loss(const Tensor& y_hat, const std::vector<int>& labels);

// Symmetrized NT-Xent over m >= 2 positive pairs (rows of p_reps and f_reps).
// Denominator: standard keeps the positive term, literal drops it. Returns an
// undefined Tensor when m < 2 (the contrastive term is skipped, not zeroed).
Tensor nt_xent_loss(const Tensor& p_reps, const Tensor& f_reps, double tau,
                    SslDenominator denom = SslDenominator::kStandard,
                    SslSimilarity sim = SslSimilarity::kDot);

struct LossBundle {
  double main = 0.0;
  double ssl = 0.0;
  double reg = 0.0;
  double total = 0.0;
  double lambda = 0.0;
  double beta = 0.0;
  bool has_ssl = false;
};

struct TotalLoss {
  Tensor total;  // scalar graph node
  LossBundle bundle;
};
// total = main + lambda * ssl + beta * sum_p ||p||^2; ssl may be undefined.
TotalLoss total_loss(const Tensor& main, const Tensor& ssl,
                     const std::vector<Parameter>& reg_params, double lambda,
                     double beta);

// --- the assembled model -----------------------------------------------------------

struct LsidnParams {
  Tensor item_embed;  // (n_items + 2) x d: real items, mask row, pad row
  Tensor cat_embed;   // (n_categories + 1) x d: real categories, pad row
  LongTermParams long_term;
  ShortTermParams short_term;
  FusionParams fusion;
  MlpParams head;
  std::vector<Parameter> all;  // registration order, the checkpoint order
};

struct ForwardResult {
  Tensor total;  // scalar, the backward target
  LossBundle bundle;
  Tensor y_hat;  // (B*n_scored) x 1
  Tensor alpha;  // (B*n_scored) x 1
  std::vector<int> labels;
  std::size_t ssl_pairs = 0;
};

struct EvalScores {
  // one row per instance, one entry per candidate (candidates[i][j])
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<double>> alphas;
};

class LsidnModel {
 public:
  LsidnModel(const ExperimentConfig& cfg, int n_items, int n_categories,
             std::vector<int> item_category);

  const ExperimentConfig& config() const { return cfg_; }
  LsidnParams& params() { return params_; }
  const LsidnParams& params() const { return params_; }
  std::vector<Parameter>& all_params() { return params_.all; }

  // Parameters the active variant can reach; everything the optimizer and the
  // regularizer see. Handles share storage with all_params().
  std::vector<Parameter> active_params() const;

  // Training forward over a batch with in-batch negatives already attached.
  // aug_rng drives view sampling; it is only consumed when the contrastive
  // branch actually runs.
  ForwardResult forward_batch(const std::vector<TrainingInstance>& batch, Rng& aug_rng);

  // Deterministic scoring of explicit candidate lists; never reads futures,
  // never builds a tape.
  EvalScores score_candidates(const std::vector<TrainingInstance>& instances,
                              const std::vector<std::vector<int>>& candidates) const;

  // Reference path: encodes one instance with the single-instance encoder ops.
  // Used to pin the batched implementation in tests.
  std::pair<double, double> forward_instance(const TrainingInstance& inst,
                                             int candidate_item) const;

  int mask_row() const { return n_items_; }
  int item_pad_row() const { return n_items_ + 1; }
  int cat_pad_row() const { return n_categories_; }

 private:
  ExperimentConfig cfg_;
  int n_items_ = 0;
  int n_categories_ = 0;
  std::vector<int> item_category_;
  LsidnParams params_;
};

}  // namespace lsidn
