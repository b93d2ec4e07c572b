#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "exgrg/matrix.hpp"
#include "exgrg/sparse.hpp"

namespace exgrg::ad {

class Tape;
class Gradients;

/// Handle to a value recorded on a Tape.
///
/// A Var is cheap to copy; it stays valid as long as its tape lives. Every
/// forward op checks its output for NaN/Inf and throws NumericError.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Scalar value of a 1x1 Var.
  double item() const;

  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients produced by one Tape::backward call, indexed by node id.
class Gradients {
 public:
  explicit Gradients(std::size_t n) : grads_(n), present_(n, false) {}

  bool has(const Var& v) const { return v.id() < present_.size() && present_[v.id()]; }
  /// Gradient of the loss w.r.t. v; a zero matrix when v was not reached.
  Matrix of(const Var& v) const;
  double norm(const Var& v) const;

  /// Adds g into the slot for node `id`.
  void accumulate(std::size_t id, const Matrix& g);
  void accumulate(std::size_t id, Matrix&& g);
  const Matrix* slot(std::size_t id) const { return present_[id] ? &grads_[id] : nullptr; }

 private:
  std::vector<Matrix> grads_;
  std::vector<bool> present_;
};

/// Records forward operations for reverse-mode differentiation.
///
/// Nodes are appended in execution order, so parents always precede children.
/// A tape has a single writer; build, differentiate and discard it on one thread.
class Tape {
 public:
  /// Propagates the gradient arriving at a node into its parents.
  using BackwardFn = std::function<void(const Tape& tape, std::size_t self,
                                        const Matrix& grad_out, Gradients& grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives gradients (a trainable parameter or differentiable input).
  Var variable(Matrix value, std::string name = {});
  /// Leaf that never receives gradients.
  Var constant(Matrix value, std::string name = {});

  /// Reverse sweep from a 1x1 loss. Does not mutate the tape, so repeated
  /// calls return identical gradients.
  Gradients backward(const Var& loss) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::string& name(std::size_t id) const { return nodes_[id].name; }

  /// Appends a node; used by op implementations. The node requires a gradient
  /// when any parent does. Throws NumericError if `value` is not finite.
  Var record(const char* op, Matrix value, std::vector<Var> parents, BackwardFn backward);

 private:
  struct Node {
    std::string name;
    Matrix value;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Primitive operations. Binary elementwise ops accept b with the same shape as
// a, a 1xC row vector, an Rx1 column vector, or a 1x1 scalar (broadcast).

Var matmul(const Var& a, const Var& b);
/// s * x for a constant sparse matrix s.
Var sparse_dense_matmul(const SparseMatrix& s, const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scalar_mul(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var transpose(const Var& a);

/// Row-wise softmax of a / temperature.
Var row_softmax(const Var& a, double temperature = 1.0);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
/// sqrt(a + epsilon)
Var sqrt(const Var& a, double epsilon = 1e-4);

/// 1x1 sum of all entries.
Var sum(const Var& a);
/// 1x1 mean of all entries.
Var mean(const Var& a);
/// 1xC column means.
Var column_mean(const Var& a);
/// 1xn diagonal of a square matrix.
Var diagonal(const Var& a);

Var relu(const Var& a);
/// max(a, slope * a) with a learnable 1x1 slope.
Var prelu(const Var& a, const Var& slope);
Var elu(const Var& a, double alpha = 1.0);
/// Rows scaled to unit L2 norm; all-zero rows stay zero.
Var l2_normalize_rows(const Var& a);
/// Train-mode batch normalization over rows with biased (1/N) variance, no affine.
Var batch_norm(const Var& a, double epsilon = 1e-5);
/// max(0, threshold - a)
Var hinge(const Var& a, double threshold);

/// Forward identity that blocks every gradient into x.
Var stop_gradient(const Var& x);

/// Selects rows of a in the given order.
Var gather_rows(const Var& a, std::span<const std::size_t> rows);
/// 1x1 entry a(r, c).
Var element(const Var& a, std::size_t r, std::size_t c);
/// Writes the 1xn vector a into positions of a 1xlength zero vector.
Var scatter_columns(const Var& a, std::span<const std::size_t> positions, std::size_t length);

/// 1xP vector of squared distances ||z_i - z_j||^2 for each (i, j) pair.
Var pair_sq_dist(const Var& z, std::span<const std::pair<std::size_t, std::size_t>> pairs);
/// 1xP vector of cosine similarities between rows i and j for each pair.
Var pair_cosine(const Var& e, std::span<const std::pair<std::size_t, std::size_t>> pairs);

// ---------------------------------------------------------------------------

/// Central finite-difference check of backward().
///
/// `f` builds a scalar loss on the given tape from leaf Vars holding the
/// parameters. Returns max over coordinates of |a - n| / max(floor, |a| + |n|)
/// with floor = max(1e-12, relative_floor * max|a|). A positive relative_floor
/// keeps coordinates whose true gradient is exactly zero (a bias feeding batch
/// norm, a softmax shift) from reporting differencing roundoff as error 1.
double finite_diff_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& f,
    const std::vector<Matrix>& params, double eps = 1e-5, double relative_floor = 0.0);

}  // namespace exgrg::ad
