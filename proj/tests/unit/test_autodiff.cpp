#include <gtest/gtest.h>

#include <cmath>

#include "exgrg/autodiff.hpp"
#include "exgrg/error.hpp"
#include "support.hpp"

namespace exgrg {
namespace {

using ad::Tape;
using ad::Var;
using testing::random_matrix;

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Reduces any output to a scalar through fixed random weights so every entry
// of the output's gradient is exercised.
Var weighted_sum(const Var& out) {
  Rng rng(99);
  Tape& t = *out.tape();
  return ad::sum(ad::mul(out, t.constant(random_matrix(out.rows(), out.cols(), rng))));
}

struct OpCase {
  const char* name;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  Builder build;
  double shift = 0.0;  // added to inputs, e.g. to keep log/sqrt arguments positive
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const OpCase& c = GetParam();
  Rng rng(17);
  std::vector<Matrix> inputs;
  for (auto [r, k] : c.shapes) {
    Matrix m = random_matrix(r, k, rng);
    for (double& v : m.values()) v += c.shift;
    inputs.push_back(std::move(m));
  }
  const double err = ad::finite_diff_check(
      [&](Tape& t, const std::vector<Var>& v) { return weighted_sum(c.build(t, v)); }, inputs);
  EXPECT_LT(err, 1e-6) << c.name;
}

const std::vector<std::pair<std::size_t, std::size_t>> kPairs{{0, 1}, {2, 0}, {3, 4}, {1, 1}};

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"matmul", {{4, 3}, {3, 5}}, [](Tape&, auto& v) { return ad::matmul(v[0], v[1]); }},
        OpCase{"sparse_dense_matmul", {{4, 3}},
               [](Tape&, auto& v) {
                 const SparseMatrix s = SparseMatrix::from_triplets(
                     2, 4, {{0, 1, 2.0}, {0, 3, -1.0}, {1, 0, 0.5}});
                 return ad::sparse_dense_matmul(s, v[0]);
               }},
        OpCase{"add_row_broadcast", {{4, 3}, {1, 3}},
               [](Tape&, auto& v) { return ad::add(v[0], v[1]); }},
        OpCase{"sub_col_broadcast", {{4, 3}, {4, 1}},
               [](Tape&, auto& v) { return ad::sub(v[0], v[1]); }},
        OpCase{"mul_scalar_broadcast", {{4, 3}, {1, 1}},
               [](Tape&, auto& v) { return ad::mul(v[0], v[1]); }},
        OpCase{"mul_same", {{4, 3}, {4, 3}}, [](Tape&, auto& v) { return ad::mul(v[0], v[1]); }},
        OpCase{"transpose", {{4, 3}}, [](Tape&, auto& v) { return ad::transpose(v[0]); }},
        // Logits are scaled so the softmax is not saturated: saturated entries have
        // gradients near 1e-8 where the relative error measures differencing noise.
        OpCase{"row_softmax", {{4, 5}},
               [](Tape&, auto& v) { return ad::row_softmax(ad::scalar_mul(v[0], 0.3), 0.3); }},
        OpCase{"exp", {{3, 3}}, [](Tape&, auto& v) { return ad::exp(v[0]); }},
        OpCase{"log", {{3, 3}}, [](Tape&, auto& v) { return ad::log(ad::exp(v[0])); }},
        OpCase{"square", {{3, 3}}, [](Tape&, auto& v) { return ad::square(v[0]); }},
        OpCase{"sqrt", {{3, 3}}, [](Tape&, auto& v) { return ad::sqrt(ad::square(v[0])); }},
        OpCase{"mean", {{3, 4}}, [](Tape&, auto& v) { return ad::mean(v[0]); }},
        OpCase{"column_mean", {{5, 4}}, [](Tape&, auto& v) { return ad::column_mean(v[0]); }},
        OpCase{"diagonal", {{4, 4}}, [](Tape&, auto& v) { return ad::diagonal(v[0]); }},
        OpCase{"relu", {{4, 4}}, [](Tape&, auto& v) { return ad::relu(v[0]); }},
        OpCase{"prelu", {{4, 4}, {1, 1}}, [](Tape&, auto& v) { return ad::prelu(v[0], v[1]); }},
        OpCase{"elu", {{4, 4}}, [](Tape&, auto& v) { return ad::elu(v[0]); }},
        OpCase{"l2_normalize_rows", {{4, 3}},
               [](Tape&, auto& v) { return ad::l2_normalize_rows(v[0]); }},
        OpCase{"batch_norm", {{6, 3}}, [](Tape&, auto& v) { return ad::batch_norm(v[0]); }},
        OpCase{"hinge", {{4, 4}}, [](Tape&, auto& v) { return ad::hinge(v[0], 0.1); }},
        OpCase{"gather_rows", {{4, 3}},
               [](Tape&, auto& v) {
                 static const std::vector<std::size_t> rows{3, 0, 3};
                 return ad::gather_rows(v[0], rows);
               }},
        OpCase{"element", {{4, 3}}, [](Tape&, auto& v) { return ad::element(v[0], 2, 1); }},
        OpCase{"scatter_columns", {{1, 3}},
               [](Tape&, auto& v) {
                 static const std::vector<std::size_t> pos{4, 0, 2};
                 return ad::scatter_columns(v[0], pos, 6);
               }},
        OpCase{"pair_sq_dist", {{5, 3}}, [](Tape&, auto& v) { return ad::pair_sq_dist(v[0], kPairs); }},
        OpCase{"pair_cosine", {{5, 3}}, [](Tape&, auto& v) { return ad::pair_cosine(v[0], kPairs); }},
        OpCase{"scalar_ops", {{3, 2}},
               [](Tape&, auto& v) { return ad::add_scalar(ad::scalar_mul(v[0], -2.5), 1.0); }}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Autodiff, StopGradientBlocks) {
  Tape t;
  const Var x = t.variable(Matrix::from_rows({{1, 2}}));
  const Var y = ad::sum(ad::add(ad::square(x), ad::stop_gradient(ad::square(x))));
  const auto g = t.backward(y);
  EXPECT_EQ(g.of(x), Matrix::from_rows({{2, 4}}));
  EXPECT_DOUBLE_EQ(y.item(), 10.0);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
  Tape t;
  const Var a = t.constant(Matrix::from_rows({{3}}));
  const Var b = t.variable(Matrix::from_rows({{2}}));
  const Var y = ad::mul(a, b);
  EXPECT_FALSE(a.requires_grad());
  EXPECT_TRUE(y.requires_grad());
  const auto g = t.backward(y);
  EXPECT_FALSE(g.has(a));
  EXPECT_EQ(g.of(b)(0, 0), 3.0);
}

TEST(Autodiff, BackwardIsRepeatable) {
  Rng rng(3);
  Tape t;
  const Var x = t.variable(random_matrix(3, 3, rng));
  const Var y = ad::sum(ad::square(ad::matmul(x, x)));
  EXPECT_EQ(t.backward(y).of(x), t.backward(y).of(x));
}

TEST(Autodiff, ForwardRejectsNonFinite) {
  Tape t;
  const Var x = t.variable(Matrix::from_rows({{-1.0}}));
  EXPECT_THROW(ad::log(x), NumericError);
}

TEST(Autodiff, ShapeMismatchThrows) {
  Tape t;
  const Var a = t.variable(Matrix(2, 3));
  const Var b = t.variable(Matrix(2, 2));
  EXPECT_THROW(ad::add(a, b), ShapeError);
  EXPECT_THROW(ad::matmul(a, a), ShapeError);
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  Tape t;
  const Var x = t.variable(Matrix::from_rows({{3}}));
  const Var y = ad::mul(x, x);  // dy/dx = 2x
  EXPECT_DOUBLE_EQ(t.backward(ad::sum(y)).of(x)(0, 0), 6.0);
}

}  // namespace
TEST(Autodiff, RelativeFloorHandlesStructuralZeros) {
  // A bias added before batch norm has an exactly zero gradient.
  Rng rng(23);
  const Matrix x = random_matrix(6, 3, rng);
  const auto f = [&](Tape& t, const std::vector<Var>& v) {
    const Var y = ad::batch_norm(ad::add(ad::matmul(t.constant(x), v[0]), v[1]));
    return ad::scalar_mul(weighted_sum(ad::elu(y)), 1e3);
  };
  const std::vector<Matrix> params{random_matrix(3, 4, rng), random_matrix(1, 4, rng)};
  Tape tape;
  const Var w = tape.variable(params[0]), b = tape.variable(params[1]);
  const ad::Gradients g = tape.backward(f(tape, {w, b}));
  EXPECT_LT(frobenius_norm(g.of(b)), 1e-9);
  EXPECT_LT(ad::finite_diff_check(f, params, 1e-5, 1e-3), 1e-6);
}

}  // namespace exgrg
