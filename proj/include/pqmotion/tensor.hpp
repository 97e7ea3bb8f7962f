#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace pqmotion {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
class Var;

namespace detail {

template <typename Scalar>
struct VarNode {
  MatX<Scalar> value;
  MatX<Scalar> grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  bool is_leaf = false;
  std::vector<Var<Scalar>> parents;
  std::function<void(VarNode&)> backward;

  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = MatX<Scalar>::Zero(value.rows(), value.cols());
  }
};

}  // namespace detail

// Reverse-mode scalar-templated autodiff over dense Eigen matrices.
// A Var is a shared handle to one node of the computation DAG. Operations are
// free functions that build new nodes; Var::backward() on a 1x1 loss fills
// .grad on every reachable node with requires_grad set.
template <typename Scalar>
class Var {
 public:
  using Node = detail::VarNode<Scalar>;
  using Mat = MatX<Scalar>;

  Var() = default;

  // Trainable leaf (participates in gradients).
  static Var leaf(Mat value) {
    Var v;
    v.n_ = std::make_shared<Node>();
    v.n_->value = std::move(value);
    v.n_->requires_grad = true;
    v.n_->is_leaf = true;
    return v;
  }

  // Constant input (no gradient).
  static Var constant(Mat value) {
    Var v;
    v.n_ = std::make_shared<Node>();
    v.n_->value = std::move(value);
    return v;
  }

  static Var scalar(Scalar s) {
    Mat m(1, 1);
    m(0, 0) = s;
    return constant(std::move(m));
  }

  static Var make(Mat value, std::vector<Var> parents,
                  std::function<void(Node&)> backward) {
    Var v;
    v.n_ = std::make_shared<Node>();
    v.n_->value = std::move(value);
    bool req = false;
    for (const Var& p : parents) req = req || p.requires_grad();
    v.n_->requires_grad = req;
    if (req) {
      v.n_->parents = std::move(parents);
      v.n_->backward = std::move(backward);
    }
    return v;
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Mat& value() const { return n_->value; }
  Mat& value_mut() { return n_->value; }
  const Mat& grad() const { return n_->grad; }
  Mat& grad_mut() {
    n_->ensure_grad();
    return n_->grad;
  }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool r) { n_->requires_grad = r; }
  bool is_leaf() const { return n_->is_leaf; }
  Eigen::Index rows() const { return n_->value.rows(); }
  Eigen::Index cols() const { return n_->value.cols(); }

  Scalar item() const {
    if (rows() != 1 || cols() != 1)
      throw std::invalid_argument("item(): tensor is not 1x1");
    return n_->value(0, 0);
  }

  void zero_grad() {
    if (n_->grad.size() != 0) n_->grad.setZero();
  }

  std::shared_ptr<Node> node() const { return n_; }

  // Backpropagate from this node. Seeds the output gradient with ones, so the
  // usual call site is a 1x1 loss.
  void backward() const {
    if (!n_ || !n_->requires_grad) return;
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node* p = node->parents[idx++].node().get();
        if (p->requires_grad && !seen.count(p)) {
          seen.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    n_->ensure_grad();
    n_->grad.setOnes();
    // order is post-order (leaves first); walk it backwards so every node's
    // grad is complete before its backward fires.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (node->backward) {
        node->ensure_grad();
        node->backward(*node);
      }
    }
  }

 private:
  std::shared_ptr<Node> n_;
};

namespace detail {

template <typename S>
void check_same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
}

template <typename S>
void accum(const Var<S>& p, const MatX<S>& g) {
  if (!p.requires_grad()) return;
  auto n = p.node();
  n->ensure_grad();
  n->grad += g;
}

}  // namespace detail

// ---- elementwise arithmetic ----

template <typename S>
Var<S> operator+(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "operator+");
  return Var<S>::make(a.value() + b.value(), {a, b},
                      [a, b](typename Var<S>::Node& n) {
                        detail::accum(a, n.grad);
                        detail::accum(b, n.grad);
                      });
}

template <typename S>
Var<S> operator-(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "operator-");
  return Var<S>::make(a.value() - b.value(), {a, b},
                      [a, b](typename Var<S>::Node& n) {
                        detail::accum(a, n.grad);
                        detail::accum(b, MatX<S>(-n.grad));
                      });
}

template <typename S>
Var<S> operator-(const Var<S>& a) {
  return Var<S>::make(-a.value(), {a}, [a](typename Var<S>::Node& n) {
    detail::accum(a, MatX<S>(-n.grad));
  });
}

// Matrix product, following the Eigen convention that * is matmul.
template <typename S>
Var<S> operator*(const Var<S>& a, const Var<S>& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("operator*: inner dimensions disagree");
  return Var<S>::make(
      a.value() * b.value(), {a, b}, [a, b](typename Var<S>::Node& n) {
        if (a.requires_grad())
          detail::accum(a, MatX<S>(n.grad * b.value().transpose()));
        if (b.requires_grad())
          detail::accum(b, MatX<S>(a.value().transpose() * n.grad));
      });
}

template <typename S>
Var<S> operator*(const Var<S>& a, S s) {
  return Var<S>::make(a.value() * s, {a}, [a, s](typename Var<S>::Node& n) {
    detail::accum(a, MatX<S>(n.grad * s));
  });
}

template <typename S>
Var<S> operator*(S s, const Var<S>& a) {
  return a * s;
}

template <typename S>
Var<S> hadamard(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "hadamard");
  return Var<S>::make(a.value().cwiseProduct(b.value()), {a, b},
                      [a, b](typename Var<S>::Node& n) {
                        if (a.requires_grad())
                          detail::accum(a, MatX<S>(n.grad.cwiseProduct(b.value())));
                        if (b.requires_grad())
                          detail::accum(b, MatX<S>(n.grad.cwiseProduct(a.value())));
                      });
}

template <typename S>
Var<S> transpose(const Var<S>& a) {
  return Var<S>::make(a.value().transpose(), {a},
                      [a](typename Var<S>::Node& n) {
                        detail::accum(a, MatX<S>(n.grad.transpose()));
                      });
}

// ---- broadcasts ----

// x[R x C] + b[1 x C], b added to every row.
template <typename S>
Var<S> rowwise_add(const Var<S>& x, const Var<S>& b) {
  if (b.rows() != 1 || b.cols() != x.cols())
    throw std::invalid_argument("rowwise_add: bias must be 1 x cols(x)");
  MatX<S> v = x.value();
  v.rowwise() += b.value().row(0);
  return Var<S>::make(std::move(v), {x, b}, [x, b](typename Var<S>::Node& n) {
    detail::accum(x, n.grad);
    if (b.requires_grad()) detail::accum(b, MatX<S>(n.grad.colwise().sum()));
  });
}

// x[C x L] + b[C x 1], b added to every column.
template <typename S>
Var<S> colwise_add(const Var<S>& x, const Var<S>& b) {
  if (b.cols() != 1 || b.rows() != x.rows())
    throw std::invalid_argument("colwise_add: bias must be rows(x) x 1");
  MatX<S> v = x.value();
  v.colwise() += b.value().col(0);
  return Var<S>::make(std::move(v), {x, b}, [x, b](typename Var<S>::Node& n) {
    detail::accum(x, n.grad);
    if (b.requires_grad()) detail::accum(b, MatX<S>(n.grad.rowwise().sum()));
  });
}

// ---- reductions & elementwise functions ----

template <typename S>
Var<S> sum(const Var<S>& a) {
  MatX<S> v(1, 1);
  v(0, 0) = a.value().sum();
  return Var<S>::make(std::move(v), {a}, [a](typename Var<S>::Node& n) {
    auto p = a.node();
    p->ensure_grad();
    p->grad.array() += n.grad(0, 0);
  });
}

template <typename S>
Var<S> mean(const Var<S>& a) {
  const S inv = S(1) / static_cast<S>(a.rows() * a.cols());
  return sum(a) * inv;
}

template <typename S>
Var<S> abs_elems(const Var<S>& a) {
  return Var<S>::make(a.value().cwiseAbs(), {a},
                      [a](typename Var<S>::Node& n) {
                        MatX<S> sign =
                            a.value().array().sign().matrix();
                        detail::accum(a, MatX<S>(n.grad.cwiseProduct(sign)));
                      });
}

template <typename S>
Var<S> square_elems(const Var<S>& a) {
  return Var<S>::make(a.value().cwiseProduct(a.value()), {a},
                      [a](typename Var<S>::Node& n) {
                        detail::accum(
                            a, MatX<S>(S(2) * n.grad.cwiseProduct(a.value())));
                      });
}

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  MatX<S> y = (S(1) / (S(1) + (-a.value().array()).exp())).matrix();
  return Var<S>::make(y, {a}, [a, y](typename Var<S>::Node& n) {
    MatX<S> d = (y.array() * (S(1) - y.array())).matrix();
    detail::accum(a, MatX<S>(n.grad.cwiseProduct(d)));
  });
}

template <typename S>
Var<S> tanh_elems(const Var<S>& a) {
  MatX<S> y = a.value().array().tanh().matrix();
  return Var<S>::make(y, {a}, [a, y](typename Var<S>::Node& n) {
    MatX<S> d = (S(1) - y.array().square()).matrix();
    detail::accum(a, MatX<S>(n.grad.cwiseProduct(d)));
  });
}

// ---- structural ops ----

template <typename S>
Var<S> slice_rows(const Var<S>& a, Eigen::Index r0, Eigen::Index nrows) {
  if (r0 < 0 || nrows < 0 || r0 + nrows > a.rows())
    throw std::invalid_argument("slice_rows: out of range");
  return Var<S>::make(a.value().middleRows(r0, nrows), {a},
                      [a, r0, nrows](typename Var<S>::Node& n) {
                        auto p = a.node();
                        p->ensure_grad();
                        p->grad.middleRows(r0, nrows) += n.grad;
                      });
}

template <typename S>
Var<S> slice_cols(const Var<S>& a, Eigen::Index c0, Eigen::Index ncols) {
  if (c0 < 0 || ncols < 0 || c0 + ncols > a.cols())
    throw std::invalid_argument("slice_cols: out of range");
  return Var<S>::make(a.value().middleCols(c0, ncols), {a},
                      [a, c0, ncols](typename Var<S>::Node& n) {
                        auto p = a.node();
                        p->ensure_grad();
                        p->grad.middleCols(c0, ncols) += n.grad;
                      });
}

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  Eigen::Index total = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw std::invalid_argument("concat_rows: column count mismatch");
    total += p.rows();
  }
  MatX<S> v(total, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return Var<S>::make(std::move(v), parts, [parts](typename Var<S>::Node& n) {
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) {
        auto pn = p.node();
        pn->ensure_grad();
        pn->grad += n.grad.middleRows(r, p.rows());
      }
      r += p.rows();
    }
  });
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  Eigen::Index total = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw std::invalid_argument("concat_cols: row count mismatch");
    total += p.cols();
  }
  MatX<S> v(rows, total);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return Var<S>::make(std::move(v), parts, [parts](typename Var<S>::Node& n) {
    Eigen::Index c = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) {
        auto pn = p.node();
        pn->ensure_grad();
        pn->grad += n.grad.middleCols(c, p.cols());
      }
      c += p.cols();
    }
  });
}

// Row lookup with scatter-add backward; the embedding primitive.
template <typename S>
Var<S> gather_rows(const Var<S>& table, std::vector<int> indices) {
  for (int i : indices)
    if (i < 0 || i >= table.rows())
      throw std::invalid_argument("gather_rows: index out of range");
  MatX<S> v(static_cast<Eigen::Index>(indices.size()), table.cols());
  for (size_t r = 0; r < indices.size(); ++r)
    v.row(static_cast<Eigen::Index>(r)) = table.value().row(indices[r]);
  return Var<S>::make(
      std::move(v), {table},
      [table, indices = std::move(indices)](typename Var<S>::Node& n) {
        auto p = table.node();
        p->ensure_grad();
        for (size_t r = 0; r < indices.size(); ++r)
          p->grad.row(indices[r]) += n.grad.row(static_cast<Eigen::Index>(r));
      });
}

// Identity on the value, but gradients flow to `z` untouched. This is the
// straight-through estimator used across the quantizer.
template <typename S>
Var<S> straight_through(const Var<S>& z, MatX<S> quantized) {
  if (quantized.rows() != z.rows() || quantized.cols() != z.cols())
    throw std::invalid_argument("straight_through: shape mismatch");
  return Var<S>::make(std::move(quantized), {z},
                      [z](typename Var<S>::Node& n) { detail::accum(z, n.grad); });
}

// Value copy with no parents; blocks gradient flow.
template <typename S>
Var<S> detach(const Var<S>& a) {
  return Var<S>::constant(a.value());
}

}  // namespace pqmotion
