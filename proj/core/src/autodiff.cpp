#include "exgrg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "exgrg/error.hpp"

namespace exgrg::ad {

// ---------------------------------------------------------------------------
// Var / Gradients / Tape

const Matrix& Var::value() const {
  if (!tape_) throw ShapeError("Var: use of an unbound handle");
  return tape_->value(id_);
}

double Var::item() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("Var::item: not a 1x1 value");
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Matrix Gradients::of(const Var& v) const {
  if (has(v)) return grads_[v.id()];
  return Matrix(v.rows(), v.cols());
}

double Gradients::norm(const Var& v) const { return has(v) ? frobenius_norm(grads_[v.id()]) : 0.0; }

void Gradients::accumulate(std::size_t id, const Matrix& g) {
  if (!present_[id]) {
    grads_[id] = g;
    present_[id] = true;
    return;
  }
  auto& dst = grads_[id].values();
  const auto& src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Gradients::accumulate(std::size_t id, Matrix&& g) {
  if (!present_[id]) {
    grads_[id] = std::move(g);
    present_[id] = true;
    return;
  }
  accumulate(id, static_cast<const Matrix&>(g));
}

Var Tape::variable(Matrix value, std::string name) {
  if (!value.all_finite()) throw NumericError("Tape::variable: non-finite leaf '" + name + "'");
  nodes_.push_back({std::move(name), std::move(value), true, {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value, std::string name) {
  if (!value.all_finite()) throw NumericError("Tape::constant: non-finite leaf '" + name + "'");
  nodes_.push_back({std::move(name), std::move(value), false, {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Matrix value, std::vector<Var> parents, BackwardFn backward) {
  bool needs_grad = false;
  std::vector<std::size_t> ids;
  ids.reserve(parents.size());
  for (const Var& p : parents) {
    if (p.tape() != this) throw ShapeError(std::string(op) + ": operands live on different tapes");
    needs_grad = needs_grad || nodes_[p.id()].requires_grad;
    ids.push_back(p.id());
  }
  if (!value.all_finite()) throw NumericError(std::string(op) + ": non-finite result");
  nodes_.push_back({op, std::move(value), needs_grad, std::move(ids),
                    needs_grad ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape() != this) throw ShapeError("backward: loss belongs to another tape");
  const Matrix& lv = loss.value();
  if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward: loss must be 1x1");
  Gradients grads(nodes_.size());
  if (!nodes_[loss.id()].requires_grad) return grads;
  grads.accumulate(loss.id(), Matrix(1, 1, 1.0));
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    const Matrix* g = grads.slot(id);
    if (!g || !node.requires_grad || !node.backward) continue;
    node.backward(*this, id, *g, grads);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// helpers

namespace {

enum class Bcast { kSame, kRow, kCol, kScalar };

Bcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (a.same_shape(b)) return Bcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::kCol;
  std::ostringstream msg;
  msg << op << ": cannot broadcast " << b.rows() << "x" << b.cols() << " onto " << a.rows() << "x"
      << a.cols();
  throw ShapeError(msg.str());
}

double bval(const Matrix& b, Bcast k, std::size_t r, std::size_t c) {
  switch (k) {
    case Bcast::kSame: return b(r, c);
    case Bcast::kRow: return b(0, c);
    case Bcast::kCol: return b(r, 0);
    case Bcast::kScalar: return b(0, 0);
  }
  return 0.0;
}

// Sums a full-shape gradient down to the broadcast shape of b.
Matrix reduce_to(const Matrix& g, Bcast k, std::size_t brows, std::size_t bcols) {
  if (k == Bcast::kSame) return g;
  Matrix out(brows, bcols);
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) {
      const double v = g(r, c);
      switch (k) {
        case Bcast::kRow: out(0, c) += v; break;
        case Bcast::kCol: out(r, 0) += v; break;
        case Bcast::kScalar: out(0, 0) += v; break;
        case Bcast::kSame: break;
      }
    }
  return out;
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  const auto& src = a.values();
  auto& dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

// Unary elementwise op whose local derivative depends on (input, output).
template <typename Fwd, typename Deriv>
Var unary(const char* op, const Var& a, Fwd fwd, Deriv deriv) {
  Tape& tape = *a.tape();
  const std::size_t aid = a.id();
  return tape.record(op, map(a.value(), fwd), {a},
                     [aid, deriv](const Tape& t, std::size_t self, const Matrix& g, Gradients& gr) {
                       if (!t.requires_grad(aid)) return;
                       const auto& x = t.value(aid).values();
                       const auto& y = t.value(self).values();
                       Matrix ga(g.rows(), g.cols());
                       auto& d = ga.values();
                       const auto& gv = g.values();
                       for (std::size_t i = 0; i < d.size(); ++i) d[i] = gv[i] * deriv(x[i], y[i]);
                       gr.accumulate(aid, std::move(ga));
                     });
}

Tape& tape_of(const Var& a) {
  if (!a.tape()) throw ShapeError("operation on an unbound Var");
  return *a.tape();
}

}  // namespace

// ---------------------------------------------------------------------------
// linear algebra

Var matmul(const Var& a, const Var& b) {
  Tape& tape = tape_of(a);
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record("matmul", exgrg::matmul(a.value(), b.value()), {a, b},
                     [aid, bid](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (t.requires_grad(aid)) gr.accumulate(aid, exgrg::matmul_nt(g, t.value(bid)));
                       if (t.requires_grad(bid)) gr.accumulate(bid, exgrg::matmul_tn(t.value(aid), g));
                     });
}

Var sparse_dense_matmul(const SparseMatrix& s, const Var& x) {
  Tape& tape = tape_of(x);
  const std::size_t xid = x.id();
  // The sparse operand is constant; keep a shared copy for the backward pass.
  auto held = std::make_shared<const SparseMatrix>(s);
  return tape.record("sparse_dense_matmul", s.multiply(x.value()), {x},
                     [xid, held](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (t.requires_grad(xid)) gr.accumulate(xid, held->transpose_multiply(g));
                     });
}

Var transpose(const Var& a) {
  Tape& tape = tape_of(a);
  const std::size_t aid = a.id();
  return tape.record("transpose", exgrg::transpose(a.value()), {a},
                     [aid](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (t.requires_grad(aid)) gr.accumulate(aid, exgrg::transpose(g));
                     });
}

// ---------------------------------------------------------------------------
// elementwise binary

Var add(const Var& a, const Var& b) {
  Tape& tape = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Bcast k = broadcast_kind(av, bv, "add");
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) + bval(bv, k, r, c);
  const std::size_t aid = a.id(), bid = b.id();
  const std::size_t br = bv.rows(), bc = bv.cols();
  return tape.record("add", std::move(out), {a, b},
                     [=](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (t.requires_grad(aid)) gr.accumulate(aid, g);
                       if (t.requires_grad(bid)) gr.accumulate(bid, reduce_to(g, k, br, bc));
                     });
}

Var sub(const Var& a, const Var& b) {
  Tape& tape = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Bcast k = broadcast_kind(av, bv, "sub");
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) - bval(bv, k, r, c);
  const std::size_t aid = a.id(), bid = b.id();
  const std::size_t br = bv.rows(), bc = bv.cols();
  return tape.record("sub", std::move(out), {a, b},
                     [=](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (t.requires_grad(aid)) gr.accumulate(aid, g);
                       if (t.requires_grad(bid)) {
                         Matrix gb = reduce_to(g, k, br, bc);
                         for (double& v : gb.values()) v = -v;
                         gr.accumulate(bid, std::move(gb));
                       }
                     });
}

Var mul(const Var& a, const Var& b) {
  Tape& tape = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Bcast k = broadcast_kind(av, bv, "mul");
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) * bval(bv, k, r, c);
  const std::size_t aid = a.id(), bid = b.id();
  const std::size_t br = bv.rows(), bc = bv.cols();
  return tape.record("mul", std::move(out), {a, b},
                     [=](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       const Matrix& x = t.value(aid);
                       const Matrix& y = t.value(bid);
                       if (t.requires_grad(aid)) {
                         Matrix ga(g.rows(), g.cols());
                         for (std::size_t r = 0; r < g.rows(); ++r)
                           for (std::size_t c = 0; c < g.cols(); ++c)
                             ga(r, c) = g(r, c) * bval(y, k, r, c);
                         gr.accumulate(aid, std::move(ga));
                       }
                       if (t.requires_grad(bid)) {
                         Matrix full(g.rows(), g.cols());
                         for (std::size_t i = 0; i < full.size(); ++i)
                           full.values()[i] = g.values()[i] * x.values()[i];
                         gr.accumulate(bid, reduce_to(full, k, br, bc));
                       }
                     });
}

Var scalar_mul(const Var& a, double s) {
  return unary("scalar_mul", a, [s](double x) { return s * x; },
               [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// elementwise unary

Var exp(const Var& a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary("square", a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var sqrt(const Var& a, double epsilon) {
  return unary("sqrt", a, [epsilon](double x) { return std::sqrt(x + epsilon); },
               [](double, double y) { return 0.5 / y; });
}

Var relu(const Var& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(const Var& a, double alpha) {
  return unary("elu", a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
               [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Var hinge(const Var& a, double threshold) {
  return unary("hinge", a, [threshold](double x) { return std::max(0.0, threshold - x); },
               [threshold](double x, double) { return threshold - x > 0.0 ? -1.0 : 0.0; });
}

Var prelu(const Var& a, const Var& slope) {
  Tape& tape = tape_of(a);
  const Matrix& sv = slope.value();
  if (sv.rows() != 1 || sv.cols() != 1) throw ShapeError("prelu: slope must be 1x1");
  const double s = sv(0, 0);
  const std::size_t aid = a.id(), sid = slope.id();
  return tape.record("prelu", map(a.value(), [s](double x) { return x > 0.0 ? x : s * x; }),
                     {a, slope}, [aid, sid](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       const auto& x = t.value(aid).values();
                       const double s = t.value(sid)(0, 0);
                       if (t.requires_grad(aid)) {
                         Matrix ga(g.rows(), g.cols());
                         for (std::size_t i = 0; i < x.size(); ++i)
                           ga.values()[i] = g.values()[i] * (x[i] > 0.0 ? 1.0 : s);
                         gr.accumulate(aid, std::move(ga));
                       }
                       if (t.requires_grad(sid)) {
                         double acc = 0.0;
                         for (std::size_t i = 0; i < x.size(); ++i)
                           if (x[i] <= 0.0) acc += g.values()[i] * x[i];
                         gr.accumulate(sid, Matrix(1, 1, acc));
                       }
                     });
}

// ---------------------------------------------------------------------------
// reductions

Var sum(const Var& a) {
  Tape& tape = tape_of(a);
  const std::size_t aid = a.id();
  const std::size_t r = a.rows(), c = a.cols();
  return tape.record("sum", Matrix(1, 1, exgrg::sum(a.value())), {a},
                     [aid, r, c](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (t.requires_grad(aid)) gr.accumulate(aid, Matrix(r, c, g(0, 0)));
                     });
}

Var mean(const Var& a) {
  Tape& tape = tape_of(a);
  const std::size_t aid = a.id();
  const std::size_t r = a.rows(), c = a.cols();
  const double n = static_cast<double>(r * c);
  if (n == 0) throw ShapeError("mean: empty input");
  return tape.record("mean", Matrix(1, 1, exgrg::sum(a.value()) / n), {a},
                     [aid, r, c, n](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (t.requires_grad(aid)) gr.accumulate(aid, Matrix(r, c, g(0, 0) / n));
                     });
}

Var column_mean(const Var& a) {
  Tape& tape = tape_of(a);
  const Matrix& x = a.value();
  if (x.rows() == 0) throw ShapeError("column_mean: no rows");
  const double n = static_cast<double>(x.rows());
  Matrix out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(0, c) += x(r, c);
  for (double& v : out.values()) v /= n;
  const std::size_t aid = a.id();
  const std::size_t rows = x.rows();
  return tape.record("column_mean", std::move(out), {a},
                     [aid, rows, n](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (!t.requires_grad(aid)) return;
                       Matrix ga(rows, g.cols());
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) = g(0, c) / n;
                       gr.accumulate(aid, std::move(ga));
                     });
}

Var diagonal(const Var& a) {
  Tape& tape = tape_of(a);
  const Matrix& x = a.value();
  if (x.rows() != x.cols()) throw ShapeError("diagonal: matrix is not square");
  Matrix out(1, x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out(0, i) = x(i, i);
  const std::size_t aid = a.id();
  const std::size_t n = x.rows();
  return tape.record("diagonal", std::move(out), {a},
                     [aid, n](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (!t.requires_grad(aid)) return;
                       Matrix ga(n, n);
                       for (std::size_t i = 0; i < n; ++i) ga(i, i) = g(0, i);
                       gr.accumulate(aid, std::move(ga));
                     });
}

// ---------------------------------------------------------------------------
// row-wise ops

Var row_softmax(const Var& a, double temperature) {
  if (!(temperature > 0.0)) throw ShapeError("row_softmax: temperature must be positive");
  Tape& tape = tape_of(a);
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    auto yr = y.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : xr) mx = std::max(mx, v);
    double z = 0.0;
    for (std::size_t c = 0; c < xr.size(); ++c) {
      yr[c] = std::exp((xr[c] - mx) / temperature);
      z += yr[c];
    }
    for (double& v : yr) v /= z;
  }
  const std::size_t aid = a.id();
  return tape.record("row_softmax", std::move(y), {a},
                     [aid, temperature](const Tape& t, std::size_t self, const Matrix& g,
                                        Gradients& gr) {
                       if (!t.requires_grad(aid)) return;
                       const Matrix& y = t.value(self);
                       Matrix ga(g.rows(), g.cols());
                       for (std::size_t r = 0; r < g.rows(); ++r) {
                         double dot = 0.0;
                         for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
                         for (std::size_t c = 0; c < g.cols(); ++c)
                           ga(r, c) = y(r, c) * (g(r, c) - dot) / temperature;
                       }
                       gr.accumulate(aid, std::move(ga));
                     });
}

Var l2_normalize_rows(const Var& a) {
  Tape& tape = tape_of(a);
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  std::vector<double> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sq = 0.0;
    for (double v : x.row(r)) sq += v * v;
    norms[r] = std::sqrt(sq);
    if (norms[r] == 0.0) continue;
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) / norms[r];
  }
  const std::size_t aid = a.id();
  return tape.record("l2_normalize_rows", std::move(y), {a},
                     [aid, norms](const Tape& t, std::size_t self, const Matrix& g, Gradients& gr) {
                       if (!t.requires_grad(aid)) return;
                       const Matrix& y = t.value(self);
                       Matrix ga(g.rows(), g.cols());
                       for (std::size_t r = 0; r < g.rows(); ++r) {
                         if (norms[r] == 0.0) continue;
                         double dot = 0.0;
                         for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
                         for (std::size_t c = 0; c < g.cols(); ++c)
                           ga(r, c) = (g(r, c) - y(r, c) * dot) / norms[r];
                       }
                       gr.accumulate(aid, std::move(ga));
                     });
}

Var batch_norm(const Var& a, double epsilon) {
  Tape& tape = tape_of(a);
  const Matrix& x = a.value();
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) throw ShapeError("batch_norm: needs at least two rows");
  const double nn = static_cast<double>(n);
  std::vector<double> mu(d, 0.0), var(d, 0.0), inv_std(d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += x(r, c);
  for (double& m : mu) m /= nn;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = x(r, c) - mu[c];
      var[c] += dv * dv;
    }
  for (std::size_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] / nn + epsilon);
  Matrix y(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) y(r, c) = (x(r, c) - mu[c]) * inv_std[c];

  const std::size_t aid = a.id();
  return tape.record(
      "batch_norm", std::move(y), {a},
      [aid, inv_std, nn](const Tape& t, std::size_t self, const Matrix& g, Gradients& gr) {
        if (!t.requires_grad(aid)) return;
        const Matrix& y = t.value(self);
        const std::size_t n = g.rows(), d = g.cols();
        std::vector<double> mean_g(d, 0.0), mean_gy(d, 0.0);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c) {
            mean_g[c] += g(r, c);
            mean_gy[c] += g(r, c) * y(r, c);
          }
        for (std::size_t c = 0; c < d; ++c) {
          mean_g[c] /= nn;
          mean_gy[c] /= nn;
        }
        Matrix ga(n, d);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c)
            ga(r, c) = inv_std[c] * (g(r, c) - mean_g[c] - y(r, c) * mean_gy[c]);
        gr.accumulate(aid, std::move(ga));
      });
}

Var stop_gradient(const Var& x) {
  Tape& tape = tape_of(x);
  // Recorded as a fresh constant: no parent link, hence no backward path.
  return tape.constant(x.value(), "stop_gradient");
}

// ---------------------------------------------------------------------------
// indexing

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
  Tape& tape = tape_of(a);
  const std::size_t aid = a.id();
  const std::size_t src_rows = a.rows();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape.record("gather_rows", exgrg::gather_rows(a.value(), rows), {a},
                     [aid, src_rows, idx](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (!t.requires_grad(aid)) return;
                       Matrix ga(src_rows, g.cols());
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         auto dst = ga.row(idx[i]);
                         const auto src = g.row(i);
                         for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                       }
                       gr.accumulate(aid, std::move(ga));
                     });
}

Var element(const Var& a, std::size_t r, std::size_t c) {
  Tape& tape = tape_of(a);
  if (r >= a.rows() || c >= a.cols()) throw ShapeError("element: index out of range");
  const std::size_t aid = a.id();
  const std::size_t rows = a.rows(), cols = a.cols();
  return tape.record("element", Matrix(1, 1, a.value()(r, c)), {a},
                     [=](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (!t.requires_grad(aid)) return;
                       Matrix ga(rows, cols);
                       ga(r, c) = g(0, 0);
                       gr.accumulate(aid, std::move(ga));
                     });
}

Var scatter_columns(const Var& a, std::span<const std::size_t> positions, std::size_t length) {
  Tape& tape = tape_of(a);
  if (a.rows() != 1 || a.cols() != positions.size())
    throw ShapeError("scatter_columns: expects a 1xn input matching the position list");
  Matrix out(1, length);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] >= length) throw ShapeError("scatter_columns: position out of range");
    out(0, positions[i]) += a.value()(0, i);
  }
  const std::size_t aid = a.id();
  std::vector<std::size_t> pos(positions.begin(), positions.end());
  return tape.record("scatter_columns", std::move(out), {a},
                     [aid, pos](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (!t.requires_grad(aid)) return;
                       Matrix ga(1, pos.size());
                       for (std::size_t i = 0; i < pos.size(); ++i) ga(0, i) = g(0, pos[i]);
                       gr.accumulate(aid, std::move(ga));
                     });
}

// ---------------------------------------------------------------------------
// pairwise

Var pair_sq_dist(const Var& z, std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  Tape& tape = tape_of(z);
  const Matrix& zv = z.value();
  Matrix out(1, pairs.size());
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [i, j] = pairs[e];
    if (i >= zv.rows() || j >= zv.rows()) throw ShapeError("pair_sq_dist: row index out of range");
    double acc = 0.0;
    for (std::size_t c = 0; c < zv.cols(); ++c) {
      const double d = zv(i, c) - zv(j, c);
      acc += d * d;
    }
    out(0, e) = acc;
  }
  const std::size_t zid = z.id();
  std::vector<std::pair<std::size_t, std::size_t>> held(pairs.begin(), pairs.end());
  return tape.record("pair_sq_dist", std::move(out), {z},
                     [zid, held](const Tape& t, std::size_t, const Matrix& g, Gradients& gr) {
                       if (!t.requires_grad(zid)) return;
                       const Matrix& zv = t.value(zid);
                       Matrix gz(zv.rows(), zv.cols());
                       for (std::size_t e = 0; e < held.size(); ++e) {
                         const double w = g(0, e);
                         if (w == 0.0) continue;
                         const auto [i, j] = held[e];
                         for (std::size_t c = 0; c < zv.cols(); ++c) {
                           const double d = 2.0 * w * (zv(i, c) - zv(j, c));
                           gz(i, c) += d;
                           gz(j, c) -= d;
                         }
                       }
                       gr.accumulate(zid, std::move(gz));
                     });
}

Var pair_cosine(const Var& e, std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  Tape& tape = tape_of(e);
  const Matrix& ev = e.value();
  std::vector<double> norms(ev.rows());
  for (std::size_t r = 0; r < ev.rows(); ++r) {
    double sq = 0.0;
    for (double v : ev.row(r)) sq += v * v;
    norms[r] = std::sqrt(sq);
  }
  Matrix out(1, pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    if (i >= ev.rows() || j >= ev.rows()) throw ShapeError("pair_cosine: row index out of range");
    if (norms[i] == 0.0 || norms[j] == 0.0) continue;
    double dot = 0.0;
    for (std::size_t c = 0; c < ev.cols(); ++c) dot += ev(i, c) * ev(j, c);
    out(0, p) = dot / (norms[i] * norms[j]);
  }
  const std::size_t eid = e.id();
  std::vector<std::pair<std::size_t, std::size_t>> held(pairs.begin(), pairs.end());
  return tape.record(
      "pair_cosine", std::move(out), {e},
      [eid, held, norms](const Tape& t, std::size_t self, const Matrix& g, Gradients& gr) {
        if (!t.requires_grad(eid)) return;
        const Matrix& ev = t.value(eid);
        const Matrix& cosv = t.value(self);
        Matrix ge(ev.rows(), ev.cols());
        for (std::size_t p = 0; p < held.size(); ++p) {
          const double w = g(0, p);
          const auto [i, j] = held[p];
          if (w == 0.0 || norms[i] == 0.0 || norms[j] == 0.0) continue;
          const double cs = cosv(0, p);
          const double inv = 1.0 / (norms[i] * norms[j]);
          for (std::size_t c = 0; c < ev.cols(); ++c) {
            ge(i, c) += w * (ev(j, c) * inv - cs * ev(i, c) / (norms[i] * norms[i]));
            ge(j, c) += w * (ev(i, c) * inv - cs * ev(j, c) / (norms[j] * norms[j]));
          }
        }
        gr.accumulate(eid, std::move(ge));
      });
}

// ---------------------------------------------------------------------------

double finite_diff_check(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                         const std::vector<Matrix>& params, double eps,
                         double relative_floor) {
  if (!(eps > 0.0)) throw ShapeError("finite_diff_check: eps must be positive");

  auto evaluate = [&](const std::vector<Matrix>& p) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(p.size());
    for (const auto& m : p) leaves.push_back(tape.constant(m));
    const double v = f(tape, leaves).item();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite objective");
    return v;
  };

  Tape tape;
  std::vector<Var> leaves;
  for (const auto& m : params) leaves.push_back(tape.variable(m));
  const Var loss = f(tape, leaves);
  const Gradients grads = tape.backward(loss);

  std::vector<Matrix> analytic_all;
  double scale = 0.0;
  for (const auto& leaf : leaves) {
    analytic_all.push_back(grads.of(leaf));
    for (double v : analytic_all.back().values()) scale = std::max(scale, std::abs(v));
  }
  const double floor = std::max(1e-12, relative_floor * scale);

  double worst = 0.0;
  std::vector<Matrix> probe = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& analytic = analytic_all[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double orig = params[k].values()[i];
      probe[k].values()[i] = orig + eps;
      const double up = evaluate(probe);
      probe[k].values()[i] = orig - eps;
      const double down = evaluate(probe);
      probe[k].values()[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.values()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(floor, std::abs(a) + std::abs(numeric)));
    }
  }
  return worst;
}

}  // namespace exgrg::ad
