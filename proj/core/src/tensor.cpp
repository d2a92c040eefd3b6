#include "lsidn/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace lsidn {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

MapC cmap(const Node& n) { return MapC(n.value.data(), n.rows, n.cols); }
MapM vmap(Node& n) { return MapM(n.value.data(), n.rows, n.cols); }
MapM gmap(Node& n) {
  n.ensure_grad();
  return MapM(n.grad.data(), n.rows, n.cols);
}

thread_local int g_no_grad_depth = 0;

std::string shape_str(const Node& n) {
  std::ostringstream o;
  o << n.rows << "x" << n.cols;
  return o.str();
}

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("tensor: " + msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

void require_same_shape(const Node& a, const Node& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols)
    fail(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

std::shared_ptr<Node> make_node(int rows, int cols,
                                std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  bool need = false;
  if (g_no_grad_depth == 0)
    for (const auto& p : parents)
      if (p->requires_grad) need = true;
  n->requires_grad = need;
  if (need) n->parents = std::move(parents);
  return n;
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  require(rows > 0 && cols > 0, "zeros: dimensions must be positive");
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::constant(int rows, int cols, double fill) {
  Tensor t = zeros(rows, cols, false);
  std::fill(t.node()->value.begin(), t.node()->value.end(), fill);
  return t;
}

Tensor Tensor::from_values(int rows, int cols, std::vector<double> values,
                           bool requires_grad) {
  require(rows > 0 && cols > 0, "from_values: dimensions must be positive");
  require(values.size() == static_cast<std::size_t>(rows) * cols,
          "from_values: value count does not match shape");
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::uniform(int rows, int cols, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  Tensor t = zeros(rows, cols, requires_grad);
  for (double& v : t.node()->value) v = rng.uniform(lo, hi);
  return t;
}

double Tensor::at(int r, int c) const {
  require(r >= 0 && r < rows() && c >= 0 && c < cols(), "at: index out of range");
  return node_->value[static_cast<std::size_t>(r) * cols() + c];
}

double Tensor::scalar() const {
  require(rows() == 1 && cols() == 1, "scalar: tensor is " + shape_str(*node_));
  return node_->value[0];
}

double Tensor::grad_at(int r, int c) const {
  if (node_->grad.empty()) return 0.0;
  return node_->grad[static_cast<std::size_t>(r) * cols() + c];
}

void backward(const Tensor& loss) {
  require(loss.defined() && loss.rows() == 1 && loss.cols() == 1,
          "backward: loss must be a scalar");
  Node* root = loss.node().get();
  require(root->requires_grad, "backward: loss does not require grad");

  // reverse post-order = every consumer handled before its producers
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

void zero_grad(std::vector<Parameter>& params) {
  for (auto& p : params) p.tensor.node()->grad.clear();
}

// --- elementwise -------------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_pointwise(const Tensor& a, const char* name, Fwd fwd, Bwd bwd) {
  auto an = a.node();
  require(an != nullptr, std::string(name) + ": undefined input");
  auto out = make_node(an->rows, an->cols, {an});
  for (std::size_t i = 0; i < an->value.size(); ++i) out->value[i] = fwd(an->value[i]);
  if (out->requires_grad) {
    out->backward = [bwd](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < self.value.size(); ++i)
        p.grad[i] += self.grad[i] * bwd(p.value[i], self.value[i]);
    };
  }
  return Tensor(std::move(out));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(*a.node(), *b.node(), "add");
  auto out = make_node(a.rows(), a.cols(), {a.node(), b.node()});
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] + bv[i];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      for (int side = 0; side < 2; ++side) {
        Node& p = *self.parents[side];
        if (!p.requires_grad) continue;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(*a.node(), *b.node(), "sub");
  auto out = make_node(a.rows(), a.cols(), {a.node(), b.node()});
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] - bv[i];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(*a.node(), *b.node(), "mul");
  auto out = make_node(a.rows(), a.cols(), {a.node(), b.node()});
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * bv[i];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          pa.grad[i] += self.grad[i] * pb.value[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          pb.grad[i] += self.grad[i] * pa.value[i];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor neg(const Tensor& a) {
  return unary_pointwise(a, "neg", [](double x) { return -x; },
                         [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double c) {
  return unary_pointwise(a, "scale", [c](double x) { return c * x; },
                         [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_pointwise(a, "add_scalar", [c](double x) { return x + c; },
                         [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_pointwise(a, "sigmoid",
                         [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                         [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary_pointwise(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                         [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary_pointwise(a, "tanh", [](double x) { return std::tanh(x); },
                         [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary_pointwise(a, "exp", [](double x) { return std::exp(x); },
                         [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.node()->value)
    require(v > 0.0, "log: input must be strictly positive");
  return unary_pointwise(a, "log", [](double x) { return std::log(x); },
                         [](double x, double) { return 1.0 / x; });
}

// --- matrix shape and movement -----------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Node& an = *a.node();
  const Node& bn = *b.node();
  if (an.cols != bn.rows)
    fail("matmul: inner dimensions differ, " + shape_str(an) + " vs " + shape_str(bn));
  auto out = make_node(an.rows, bn.cols, {a.node(), b.node()});
  vmap(*out).noalias() = cmap(an) * cmap(bn);
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      MapC g(self.grad.data(), self.rows, self.cols);
      if (pa.requires_grad) gmap(pa).noalias() += g * cmap(pb).transpose();
      if (pb.requires_grad) gmap(pb).noalias() += cmap(pa).transpose() * g;
    };
  }
  return Tensor(std::move(out));
}

Tensor transpose(const Tensor& a) {
  const Node& an = *a.node();
  auto out = make_node(an.cols, an.rows, {a.node()});
  vmap(*out) = cmap(an).transpose();
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      MapC g(self.grad.data(), self.rows, self.cols);
      gmap(p) += g.transpose();
    };
  }
  return Tensor(std::move(out));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  int rows = parts.front().rows();
  int cols = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& t : parts) {
    require(t.rows() == rows, "concat_cols: row mismatch " + shape_str(*t.node()) +
                                  " vs " + shape_str(*parts.front().node()));
    cols += t.cols();
    parents.push_back(t.node());
  }
  auto out = make_node(rows, cols, parents);
  int at = 0;
  for (const auto& t : parts) {
    const Node& p = *t.node();
    for (int r = 0; r < rows; ++r)
      std::copy_n(p.value.data() + static_cast<std::size_t>(r) * p.cols, p.cols,
                  out->value.data() + static_cast<std::size_t>(r) * cols + at);
    at += p.cols;
  }
  if (out->requires_grad) {
    out->backward = [parents](Node& self) {
      int col0 = 0;
      for (const auto& pp : parents) {
        Node& p = *pp;
        if (p.requires_grad) {
          p.ensure_grad();
          for (int r = 0; r < self.rows; ++r)
            for (int c = 0; c < p.cols; ++c)
              p.grad[static_cast<std::size_t>(r) * p.cols + c] +=
                  self.grad[static_cast<std::size_t>(r) * self.cols + col0 + c];
        }
        col0 += p.cols;
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  int cols = parts.front().cols();
  int rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& t : parts) {
    require(t.cols() == cols, "concat_rows: column mismatch " + shape_str(*t.node()) +
                                  " vs " + shape_str(*parts.front().node()));
    rows += t.rows();
    parents.push_back(t.node());
  }
  auto out = make_node(rows, cols, parents);
  double* dst = out->value.data();
  for (const auto& t : parts) {
    const auto& v = t.node()->value;
    dst = std::copy(v.begin(), v.end(), dst);
  }
  if (out->requires_grad) {
    out->backward = [parents](Node& self) {
      std::size_t at = 0;
      for (const auto& pp : parents) {
        Node& p = *pp;
        if (p.requires_grad) {
          p.ensure_grad();
          for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += self.grad[at + i];
        }
        at += p.value.size();
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  const Node& an = *a.node();
  require(0 <= r0 && r0 < r1 && r1 <= an.rows, "slice_rows: bad range");
  auto out = make_node(r1 - r0, an.cols, {a.node()});
  std::copy_n(an.value.data() + static_cast<std::size_t>(r0) * an.cols,
              out->value.size(), out->value.data());
  if (out->requires_grad) {
    out->backward = [r0](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      std::size_t base = static_cast<std::size_t>(r0) * p.cols;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[base + i] += self.grad[i];
    };
  }
  return Tensor(std::move(out));
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  const Node& an = *a.node();
  require(0 <= c0 && c0 < c1 && c1 <= an.cols, "slice_cols: bad range");
  auto out = make_node(an.rows, c1 - c0, {a.node()});
  for (int r = 0; r < an.rows; ++r)
    std::copy_n(an.value.data() + static_cast<std::size_t>(r) * an.cols + c0,
                out->cols, out->value.data() + static_cast<std::size_t>(r) * out->cols);
  if (out->requires_grad) {
    out->backward = [c0](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (int r = 0; r < self.rows; ++r)
        for (int c = 0; c < self.cols; ++c)
          p.grad[static_cast<std::size_t>(r) * p.cols + c0 + c] +=
              self.grad[static_cast<std::size_t>(r) * self.cols + c];
    };
  }
  return Tensor(std::move(out));
}

Tensor reshape(const Tensor& a, int rows, int cols) {
  const Node& an = *a.node();
  require(static_cast<std::size_t>(rows) * cols == an.value.size(),
          "reshape: element count mismatch for " + shape_str(an));
  auto out = make_node(rows, cols, {a.node()});
  out->value = an.value;
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    };
  }
  return Tensor(std::move(out));
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
  const Node& an = *a.node();
  require(!indices.empty(), "gather_rows: empty index list");
  for (int ix : indices)
    require(0 <= ix && ix < an.rows,
            "gather_rows: index " + std::to_string(ix) + " outside " + shape_str(an));
  auto out = make_node(static_cast<int>(indices.size()), an.cols, {a.node()});
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy_n(an.value.data() + static_cast<std::size_t>(indices[r]) * an.cols, an.cols,
                out->value.data() + r * an.cols);
  if (out->requires_grad) {
    out->backward = [indices](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t r = 0; r < indices.size(); ++r) {
        std::size_t src = r * self.cols;
        std::size_t dst = static_cast<std::size_t>(indices[r]) * p.cols;
        for (int c = 0; c < self.cols; ++c) p.grad[dst + c] += self.grad[src + c];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor gather_elements(const Tensor& a, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
  const Node& an = *a.node();
  require(rows.size() == cols.size() && !rows.empty(),
          "gather_elements: index lists must be non-empty and equal-length");
  for (std::size_t i = 0; i < rows.size(); ++i)
    require(0 <= rows[i] && rows[i] < an.rows && 0 <= cols[i] && cols[i] < an.cols,
            "gather_elements: index outside " + shape_str(an));
  auto out = make_node(static_cast<int>(rows.size()), 1, {a.node()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    out->value[i] = an.value[static_cast<std::size_t>(rows[i]) * an.cols + cols[i]];
  if (out->requires_grad) {
    out->backward = [rows, cols](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < rows.size(); ++i)
        p.grad[static_cast<std::size_t>(rows[i]) * p.cols + cols[i]] += self.grad[i];
    };
  }
  return Tensor(std::move(out));
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  const Node& an = *a.node();
  const Node& rn = *row.node();
  require(rn.rows == 1 && rn.cols == an.cols,
          "add_rowvec: want 1x" + std::to_string(an.cols) + ", got " + shape_str(rn));
  auto out = make_node(an.rows, an.cols, {a.node(), row.node()});
  for (int r = 0; r < an.rows; ++r)
    for (int c = 0; c < an.cols; ++c)
      out->value[static_cast<std::size_t>(r) * an.cols + c] =
          an.value[static_cast<std::size_t>(r) * an.cols + c] + rn.value[c];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pr = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
      }
      if (pr.requires_grad) {
        pr.ensure_grad();
        for (int r = 0; r < self.rows; ++r)
          for (int c = 0; c < self.cols; ++c)
            pr.grad[c] += self.grad[static_cast<std::size_t>(r) * self.cols + c];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor mul_colvec(const Tensor& a, const Tensor& col) {
  const Node& an = *a.node();
  const Node& cn = *col.node();
  require(cn.cols == 1 && cn.rows == an.rows,
          "mul_colvec: want " + std::to_string(an.rows) + "x1, got " + shape_str(cn));
  auto out = make_node(an.rows, an.cols, {a.node(), col.node()});
  for (int r = 0; r < an.rows; ++r)
    for (int c = 0; c < an.cols; ++c)
      out->value[static_cast<std::size_t>(r) * an.cols + c] =
          an.value[static_cast<std::size_t>(r) * an.cols + c] * cn.value[r];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pc = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (int r = 0; r < self.rows; ++r)
          for (int c = 0; c < self.cols; ++c)
            pa.grad[static_cast<std::size_t>(r) * self.cols + c] +=
                self.grad[static_cast<std::size_t>(r) * self.cols + c] * pc.value[r];
      }
      if (pc.requires_grad) {
        pc.ensure_grad();
        for (int r = 0; r < self.rows; ++r) {
          double s = 0.0;
          for (int c = 0; c < self.cols; ++c)
            s += self.grad[static_cast<std::size_t>(r) * self.cols + c] *
                 pa.value[static_cast<std::size_t>(r) * self.cols + c];
          pc.grad[r] += s;
        }
      }
    };
  }
  return Tensor(std::move(out));
}

// --- reductions ----------------------------------------------------------------

Tensor row_sum(const Tensor& a) {
  const Node& an = *a.node();
  auto out = make_node(an.rows, 1, {a.node()});
  for (int r = 0; r < an.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < an.cols; ++c) s += an.value[static_cast<std::size_t>(r) * an.cols + c];
    out->value[r] = s;
  }
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (int r = 0; r < p.rows; ++r)
        for (int c = 0; c < p.cols; ++c)
          p.grad[static_cast<std::size_t>(r) * p.cols + c] += self.grad[r];
    };
  }
  return Tensor(std::move(out));
}

Tensor sum_all(const Tensor& a) {
  const Node& an = *a.node();
  auto out = make_node(1, 1, {a.node()});
  double s = 0.0;
  for (double v : an.value) s += v;
  out->value[0] = s;
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (double& g : p.grad) g += self.grad[0];
    };
  }
  return Tensor(std::move(out));
}

Tensor mean_all(const Tensor& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_squares(const Tensor& a) {
  const Node& an = *a.node();
  auto out = make_node(1, 1, {a.node()});
  double s = 0.0;
  for (double v : an.value) s += v * v;
  out->value[0] = s;
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (std::size_t i = 0; i < p.value.size(); ++i)
        p.grad[i] += 2.0 * self.grad[0] * p.value[i];
    };
  }
  return Tensor(std::move(out));
}

Tensor l2_norm(const Tensor& a) {
  const Node& an = *a.node();
  auto out = make_node(1, 1, {a.node()});
  double s = 0.0;
  for (double v : an.value) s += v * v;
  out->value[0] = std::sqrt(s);
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& p = *self.parents[0];
      if (self.value[0] <= 0.0) return;  // subgradient 0 at the origin
      p.ensure_grad();
      double inv = self.grad[0] / self.value[0];
      for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += inv * p.value[i];
    };
  }
  return Tensor(std::move(out));
}

// --- softmax family --------------------------------------------------------------

Tensor masked_softmax_rows(const Tensor& a, const std::vector<double>& mask) {
  const Node& an = *a.node();
  require(mask.size() == an.value.size(),
          "masked_softmax_rows: mask size does not match " + shape_str(an));
  auto out = make_node(an.rows, an.cols, {a.node()});
  for (int r = 0; r < an.rows; ++r) {
    std::size_t base = static_cast<std::size_t>(r) * an.cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < an.cols; ++c)
      if (mask[base + c] != 0.0) mx = std::max(mx, an.value[base + c]);
    if (mx == -std::numeric_limits<double>::infinity()) continue;  // empty row -> zeros
    double z = 0.0;
    for (int c = 0; c < an.cols; ++c)
      if (mask[base + c] != 0.0) z += std::exp(an.value[base + c] - mx);
    for (int c = 0; c < an.cols; ++c)
      if (mask[base + c] != 0.0) out->value[base + c] = std::exp(an.value[base + c] - mx) / z;
  }
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (int r = 0; r < self.rows; ++r) {
        std::size_t base = static_cast<std::size_t>(r) * self.cols;
        double dot = 0.0;
        for (int c = 0; c < self.cols; ++c) dot += self.value[base + c] * self.grad[base + c];
        for (int c = 0; c < self.cols; ++c)
          p.grad[base + c] += self.value[base + c] * (self.grad[base + c] - dot);
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor softmax_rows(const Tensor& a) {
  return masked_softmax_rows(a, std::vector<double>(a.size(), 1.0));
}

Tensor masked_row_logsumexp(const Tensor& a, const std::vector<double>& mask) {
  const Node& an = *a.node();
  require(mask.size() == an.value.size(),
          "masked_row_logsumexp: mask size does not match " + shape_str(an));
  auto out = make_node(an.rows, 1, {a.node()});
  std::vector<double> weights(an.value.size(), 0.0);
  for (int r = 0; r < an.rows; ++r) {
    std::size_t base = static_cast<std::size_t>(r) * an.cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < an.cols; ++c)
      if (mask[base + c] != 0.0) mx = std::max(mx, an.value[base + c]);
    require(mx != -std::numeric_limits<double>::infinity(),
            "masked_row_logsumexp: row " + std::to_string(r) + " fully masked");
    double z = 0.0;
    for (int c = 0; c < an.cols; ++c)
      if (mask[base + c] != 0.0) z += std::exp(an.value[base + c] - mx);
    out->value[r] = mx + std::log(z);
    for (int c = 0; c < an.cols; ++c)
      if (mask[base + c] != 0.0) weights[base + c] = std::exp(an.value[base + c] - mx) / z;
  }
  if (out->requires_grad) {
    out->backward = [weights](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (int r = 0; r < p.rows; ++r) {
        std::size_t base = static_cast<std::size_t>(r) * p.cols;
        for (int c = 0; c < p.cols; ++c) p.grad[base + c] += self.grad[r] * weights[base + c];
      }
    };
  }
  return Tensor(std::move(out));
}

// --- fused blocks ------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Node& xn = *x.node();
  require(gain.rows() == 1 && gain.cols() == xn.cols,
          "layer_norm: gain must be 1x" + std::to_string(xn.cols));
  require(bias.rows() == 1 && bias.cols() == xn.cols,
          "layer_norm: bias must be 1x" + std::to_string(xn.cols));
  auto out = make_node(xn.rows, xn.cols, {x.node(), gain.node(), bias.node()});
  const int n = xn.cols;
  std::vector<double> xhat(xn.value.size());
  std::vector<double> istd(static_cast<std::size_t>(xn.rows));
  for (int r = 0; r < xn.rows; ++r) {
    std::size_t base = static_cast<std::size_t>(r) * n;
    double mean = 0.0;
    for (int c = 0; c < n; ++c) mean += xn.value[base + c];
    mean /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) {
      double d = xn.value[base + c] - mean;
      var += d * d;
    }
    var /= n;
    double is = 1.0 / std::sqrt(var + eps);
    istd[static_cast<std::size_t>(r)] = is;
    for (int c = 0; c < n; ++c) {
      xhat[base + c] = (xn.value[base + c] - mean) * is;
      out->value[base + c] = xhat[base + c] * gain.node()->value[c] + bias.node()->value[c];
    }
  }
  if (out->requires_grad) {
    out->backward = [xhat, istd, n](Node& self) {
      Node& px = *self.parents[0];
      Node& pg = *self.parents[1];
      Node& pb = *self.parents[2];
      if (pg.requires_grad) {
        pg.ensure_grad();
        for (int r = 0; r < self.rows; ++r)
          for (int c = 0; c < n; ++c)
            pg.grad[c] += self.grad[static_cast<std::size_t>(r) * n + c] *
                          xhat[static_cast<std::size_t>(r) * n + c];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (int r = 0; r < self.rows; ++r)
          for (int c = 0; c < n; ++c)
            pb.grad[c] += self.grad[static_cast<std::size_t>(r) * n + c];
      }
      if (px.requires_grad) {
        px.ensure_grad();
        for (int r = 0; r < self.rows; ++r) {
          std::size_t base = static_cast<std::size_t>(r) * n;
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (int c = 0; c < n; ++c) {
            double dxh = self.grad[base + c] * pg.value[c];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[base + c];
          }
          mean_dxhat /= n;
          mean_dxhat_xhat /= n;
          for (int c = 0; c < n; ++c) {
            double dxh = self.grad[base + c] * pg.value[c];
            px.grad[base + c] += istd[static_cast<std::size_t>(r)] *
                                 (dxh - mean_dxhat - xhat[base + c] * mean_dxhat_xhat);
          }
        }
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor session_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         const std::vector<double>& key_mask, int block_len,
                         double scale) {
  const Node& qn = *q.node();
  const Node& kn = *k.node();
  const Node& vn = *v.node();
  require(qn.rows == kn.rows && qn.rows == vn.rows,
          "session_attention: row mismatch " + shape_str(qn) + ", " + shape_str(kn) +
              ", " + shape_str(vn));
  require(qn.cols == kn.cols, "session_attention: q/k width mismatch " + shape_str(qn) +
                                  " vs " + shape_str(kn));
  require(block_len > 0 && qn.rows % block_len == 0,
          "session_attention: rows not a multiple of block_len");
  require(key_mask.size() == static_cast<std::size_t>(qn.rows),
          "session_attention: mask size must equal rows");

  const int blocks = qn.rows / block_len;
  const int dk = qn.cols;
  const int dv = vn.cols;
  auto out = make_node(qn.rows, dv, {q.node(), k.node(), v.node()});
  // attention weights, row-major (rows x block_len), kept for the backward pass
  std::vector<double> w(static_cast<std::size_t>(qn.rows) * block_len, 0.0);

  for (int s = 0; s < blocks; ++s) {
    const int row0 = s * block_len;
    for (int i = 0; i < block_len; ++i) {
      const int g = row0 + i;
      if (key_mask[g] == 0.0) continue;
      const double* qrow = qn.value.data() + static_cast<std::size_t>(g) * dk;
      double mx = -std::numeric_limits<double>::infinity();
      std::vector<double> logits(static_cast<std::size_t>(block_len),
                                 -std::numeric_limits<double>::infinity());
      for (int j = 0; j < block_len; ++j) {
        if (key_mask[row0 + j] == 0.0) continue;
        const double* krow = kn.value.data() + static_cast<std::size_t>(row0 + j) * dk;
        double dot = 0.0;
        for (int c = 0; c < dk; ++c) dot += qrow[c] * krow[c];
        logits[j] = scale * dot;
        mx = std::max(mx, logits[j]);
      }
      double z = 0.0;
      for (int j = 0; j < block_len; ++j)
        if (key_mask[row0 + j] != 0.0) z += std::exp(logits[j] - mx);
      double* wrow = w.data() + static_cast<std::size_t>(g) * block_len;
      double* orow = out->value.data() + static_cast<std::size_t>(g) * dv;
      for (int j = 0; j < block_len; ++j) {
        if (key_mask[row0 + j] == 0.0) continue;
        double wj = std::exp(logits[j] - mx) / z;
        wrow[j] = wj;
        const double* vrow = vn.value.data() + static_cast<std::size_t>(row0 + j) * dv;
        for (int c = 0; c < dv; ++c) orow[c] += wj * vrow[c];
      }
    }
  }

  if (out->requires_grad) {
    out->backward = [w, key_mask, block_len, scale, dk, dv, blocks](Node& self) {
      Node& pq = *self.parents[0];
      Node& pk = *self.parents[1];
      Node& pv = *self.parents[2];
      pq.ensure_grad();
      pk.ensure_grad();
      pv.ensure_grad();
      std::vector<double> t(static_cast<std::size_t>(block_len));
      std::vector<double> dl(static_cast<std::size_t>(block_len));
      for (int s = 0; s < blocks; ++s) {
        const int row0 = s * block_len;
        for (int i = 0; i < block_len; ++i) {
          const int g = row0 + i;
          if (key_mask[g] == 0.0) continue;
          const double* grow = self.grad.data() + static_cast<std::size_t>(g) * dv;
          const double* wrow = w.data() + static_cast<std::size_t>(g) * block_len;
          double si = 0.0;
          for (int j = 0; j < block_len; ++j) {
            if (key_mask[row0 + j] == 0.0) continue;
            const double* vrow = pv.value.data() + static_cast<std::size_t>(row0 + j) * dv;
            double dot = 0.0;
            for (int c = 0; c < dv; ++c) dot += grow[c] * vrow[c];
            t[j] = dot;
            si += wrow[j] * dot;
            double* dvrow = pv.grad.data() + static_cast<std::size_t>(row0 + j) * dv;
            for (int c = 0; c < dv; ++c) dvrow[c] += wrow[j] * grow[c];
          }
          const double* qrow = pq.value.data() + static_cast<std::size_t>(g) * dk;
          double* dqrow = pq.grad.data() + static_cast<std::size_t>(g) * dk;
          for (int j = 0; j < block_len; ++j) {
            if (key_mask[row0 + j] == 0.0) continue;
            dl[j] = wrow[j] * (t[j] - si);
            const double* krow = pk.value.data() + static_cast<std::size_t>(row0 + j) * dk;
            double* dkrow = pk.grad.data() + static_cast<std::size_t>(row0 + j) * dk;
            for (int c = 0; c < dk; ++c) {
              dqrow[c] += scale * dl[j] * krow[c];
              dkrow[c] += scale * dl[j] * qrow[c];
            }
          }
        }
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor segment_masked_mean(const Tensor& values, const std::vector<double>& mask,
                           int block_len) {
  const Node& vn = *values.node();
  require(block_len > 0 && vn.rows % block_len == 0,
          "segment_masked_mean: rows not a multiple of block_len");
  require(mask.size() == static_cast<std::size_t>(vn.rows),
          "segment_masked_mean: mask size must equal rows");
  const int blocks = vn.rows / block_len;
  auto out = make_node(blocks, vn.cols, {values.node()});
  std::vector<double> counts(static_cast<std::size_t>(blocks), 0.0);
  for (int s = 0; s < blocks; ++s) {
    double* orow = out->value.data() + static_cast<std::size_t>(s) * vn.cols;
    for (int i = 0; i < block_len; ++i) {
      const int g = s * block_len + i;
      if (mask[g] == 0.0) continue;
      counts[s] += 1.0;
      const double* vrow = vn.value.data() + static_cast<std::size_t>(g) * vn.cols;
      for (int c = 0; c < vn.cols; ++c) orow[c] += vrow[c];
    }
    if (counts[s] > 0.0)
      for (int c = 0; c < vn.cols; ++c) orow[c] /= counts[s];
  }
  if (out->requires_grad) {
    out->backward = [mask, counts, block_len, blocks](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      for (int s = 0; s < blocks; ++s) {
        if (counts[s] == 0.0) continue;
        const double* grow = self.grad.data() + static_cast<std::size_t>(s) * self.cols;
        for (int i = 0; i < block_len; ++i) {
          const int g = s * block_len + i;
          if (mask[g] == 0.0) continue;
          double* prow = p.grad.data() + static_cast<std::size_t>(g) * p.cols;
          for (int c = 0; c < self.cols; ++c) prow[c] += grow[c] / counts[s];
        }
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor segment_weighted_sum(const Tensor& weights, const Tensor& values) {
  const Node& wn = *weights.node();
  const Node& vn = *values.node();
  require(vn.rows == wn.rows * wn.cols, "segment_weighted_sum: values " + shape_str(vn) +
                                            " incompatible with weights " + shape_str(wn));
  const int m = wn.rows, S = wn.cols, d = vn.cols;
  auto out = make_node(m, d, {weights.node(), values.node()});
  for (int i = 0; i < m; ++i) {
    double* orow = out->value.data() + static_cast<std::size_t>(i) * d;
    for (int s = 0; s < S; ++s) {
      double wv = wn.value[static_cast<std::size_t>(i) * S + s];
      if (wv == 0.0) continue;
      const double* vrow = vn.value.data() + (static_cast<std::size_t>(i) * S + s) * d;
      for (int c = 0; c < d; ++c) orow[c] += wv * vrow[c];
    }
  }
  if (out->requires_grad) {
    out->backward = [m, S, d](Node& self) {
      Node& pw = *self.parents[0];
      Node& pv = *self.parents[1];
      if (pw.requires_grad) pw.ensure_grad();
      if (pv.requires_grad) pv.ensure_grad();
      for (int i = 0; i < m; ++i) {
        const double* grow = self.grad.data() + static_cast<std::size_t>(i) * d;
        for (int s = 0; s < S; ++s) {
          std::size_t vr = (static_cast<std::size_t>(i) * S + s) * static_cast<std::size_t>(d);
          if (pw.requires_grad) {
            double dot = 0.0;
            for (int c = 0; c < d; ++c) dot += grow[c] * pv.value[vr + c];
            pw.grad[static_cast<std::size_t>(i) * S + s] += dot;
          }
          if (pv.requires_grad) {
            double wv = pw.value[static_cast<std::size_t>(i) * S + s];
            if (wv == 0.0) continue;
            for (int c = 0; c < d; ++c) pv.grad[vr + c] += wv * grow[c];
          }
        }
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor binary_cross_entropy(const Tensor& y_hat, const std::vector<int>& labels) {
  const Node& yn = *y_hat.node();
  require(yn.cols == 1, "binary_cross_entropy: predictions must be a column, got " +
                            shape_str(yn));
  require(labels.size() == static_cast<std::size_t>(yn.rows),
          "binary_cross_entropy: label count must equal rows");
  constexpr double kLo = 1e-12, kHi = 1.0 - 1e-12;
  auto out = make_node(1, 1, {y_hat.node()});
  double total = 0.0;
  for (int i = 0; i < yn.rows; ++i) {
    double p = std::clamp(yn.value[static_cast<std::size_t>(i)], kLo, kHi);
    total -= labels[static_cast<std::size_t>(i)] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  out->value[0] = total / yn.rows;
  if (out->requires_grad) {
    out->backward = [labels](Node& self) {
      Node& p = *self.parents[0];
      p.ensure_grad();
      const double inv_n = 1.0 / p.rows;
      for (int i = 0; i < p.rows; ++i) {
        double raw = p.value[static_cast<std::size_t>(i)];
        if (raw <= kLo || raw >= kHi) continue;  // clamp region is flat
        double y = labels[static_cast<std::size_t>(i)];
        p.grad[static_cast<std::size_t>(i)] +=
            self.grad[0] * inv_n * (raw - y) / (raw * (1.0 - raw));
      }
    };
  }
  return Tensor(std::move(out));
}

}  // namespace lsidn
