#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lsidn/rng.hpp"

namespace lsidn {

// One vertex of a computation graph. Matrices are row-major doubles; scalars
// are 1x1. Graphs are built eagerly and differentiated by walking the tape
// backwards from a scalar loss.
struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;  // row-major, rows*cols entries
  std::vector<double> grad;   // empty until first touched, then same layout
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // accumulates into parents' grads

  std::size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Suppresses gradient tracking for every node built while alive. Evaluation
// passes use this to skip tape construction.
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Value-semantics handle onto a Node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor constant(int rows, int cols, double fill);
  static Tensor from_values(int rows, int cols, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor uniform(int rows, int cols, double lo, double hi, Rng& rng,
                        bool requires_grad = true);

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  std::size_t size() const { return node_->size(); }
  bool requires_grad() const { return node_->requires_grad; }

  double at(int r, int c) const;
  double scalar() const;  // requires 1x1
  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& mutable_values() { return node_->value; }
  const std::vector<double>& grad() const { return node_->grad; }
  double grad_at(int r, int c) const;

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

struct Parameter {
  std::string name;
  Tensor tensor;  // leaf with requires_grad = true
};

// Seeds d(loss)/d(loss) = 1 and runs reverse-mode accumulation over every
// reachable node. `loss` must be scalar.
void backward(const Tensor& loss);

void zero_grad(std::vector<Parameter>& params);

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // strictly positive input required

// --- matrix shape and movement -----------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor reshape(const Tensor& a, int rows, int cols);
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);
// k x 1 column of a(rows[i], cols[i])
Tensor gather_elements(const Tensor& a, const std::vector<int>& rows,
                       const std::vector<int>& cols);
// broadcast helpers: bias rows and per-row scaling columns
Tensor add_rowvec(const Tensor& a, const Tensor& row);
Tensor mul_colvec(const Tensor& a, const Tensor& col);

inline Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  return gather_rows(table, ids);
}

// --- reductions ----------------------------------------------------------------

Tensor row_sum(const Tensor& a);   // m x 1
Tensor sum_all(const Tensor& a);   // 1 x 1
Tensor mean_all(const Tensor& a);  // 1 x 1
Tensor sum_squares(const Tensor& a);
Tensor l2_norm(const Tensor& a);

// --- softmax family --------------------------------------------------------------

Tensor softmax_rows(const Tensor& a);
// mask entries are 0/1; masked-out entries get weight 0. Rows with no valid
// entry come out all-zero.
Tensor masked_softmax_rows(const Tensor& a, const std::vector<double>& mask);
// m x 1 log-sum-exp over each row's unmasked entries; empty rows are an error.
Tensor masked_row_logsumexp(const Tensor& a, const std::vector<double>& mask);

// --- fused blocks ------------------------------------------------------------------

// Per-row normalization: (x - mean) / sqrt(var + eps) * gain + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Scaled dot-product attention over consecutive row blocks of length
// block_len. key_mask (size rows, 0/1) hides padded positions both as queries
// and keys; fully masked blocks yield zero rows.
Tensor session_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         const std::vector<double>& key_mask, int block_len,
                         double scale);

// Mean over each length-block_len row block, restricted to mask=1 rows.
// Blocks with no valid row yield zeros. Output: (rows/block_len) x cols.
Tensor segment_masked_mean(const Tensor& values, const std::vector<double>& mask,
                           int block_len);

// out[i] = sum_s weights(i,s) * values.row(i*S + s), S = weights.cols.
Tensor segment_weighted_sum(const Tensor& weights, const Tensor& values);

// Mean binary cross-entropy with predictions clamped to [1e-12, 1-1e-12].
Tensor binary_cross_entropy(const Tensor& y_hat, const std::vector<int>& labels);

}  // namespace lsidn
