#include "gradcheck.hpp"

#include "nae/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace nae;

TEST(Tensor, SumBackwardGivesOnes) {
  Tensor x(testkit::random_matrix(3, 4, 1), true);
  sum(x).backward();
  EXPECT_TRUE(x.grad().isApprox(Matrix::Ones(3, 4)));
}

TEST(Tensor, HalfSquaredNormBackwardGivesInput) {
  Tensor x(testkit::random_matrix(2, 5, 2), true);
  scale(sum(mul(x, x)), 0.5).backward();
  EXPECT_TRUE(x.grad().isApprox(x.value()));
}

TEST(Tensor, GradientsAccumulateUntilCleared) {
  Tensor x(Matrix::Constant(1, 2, 3.0), true);
  sum(x).backward();
  sum(x).backward();
  EXPECT_EQ(x.grad()(0, 1), 2.0);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
  EXPECT_EQ(x.grad()(0, 0), 0.0);
}

TEST(Tensor, BackwardOnNonScalarThrows) {
  Tensor x(Matrix::Ones(2, 2), true);
  EXPECT_THROW(scale(x, 2.0).backward(), ContractError);
}

TEST(Tensor, ShapeMismatchThrows) {
  Tensor a(Matrix::Ones(2, 3)), b(Matrix::Ones(2, 2));
  EXPECT_THROW(matmul(a, b), DimensionError);
  EXPECT_THROW(add(a, b), DimensionError);
  EXPECT_THROW(mul(a, b), DimensionError);
}

TEST(Tensor, MutableValueOnlyForLeaves) {
  Tensor x(Matrix::Ones(1, 1), true);
  Tensor y = scale(x, 2.0);
  EXPECT_NO_THROW(x.mutable_value());
  EXPECT_THROW(y.mutable_value(), ContractError);
}

TEST(Tensor, NoGradGuardRecordsNothing) {
  Tensor x(Matrix::Ones(1, 3), true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    EXPECT_FALSE(sum(x).requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(sum(x).requires_grad());
}

TEST(Tensor, CrossEntropyTwoClassValue) {
  Matrix logits(1, 2);
  logits << 2.0, 0.0;
  const Index target[] = {0};
  const double expected = -std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
  EXPECT_NEAR(cross_entropy(Tensor(logits), target).item(), expected, 1e-15);
  EXPECT_NEAR(expected, 0.126928, 1e-6);
}

TEST(Tensor, CrossEntropyUniformIsLogK) {
  const Index target[] = {5, 0};
  EXPECT_NEAR(cross_entropy(Tensor(Matrix::Zero(2, 8)), target).item(), std::log(8.0), 1e-15);
}

TEST(Tensor, CrossEntropyRejectsOutOfRangeTarget) {
  const Index bad[] = {3};
  EXPECT_THROW(cross_entropy(Tensor(Matrix::Zero(1, 3)), bad), std::out_of_range);
}

TEST(Tensor, MseZeroForEqualInputs) {
  const Matrix m = testkit::random_matrix(3, 2, 4);
  EXPECT_EQ(mse(Tensor(m), m).item(), 0.0);
}

TEST(Tensor, MaskedSoftmaxZeroesBlockedCells) {
  const Matrix s = testkit::random_matrix(3, 4, 5);
  BoolMatrix allowed(3, 4);
  allowed << true, false, true, false, //
      false, false, false, true,       //
      true, true, true, true;
  const Matrix p = masked_softmax(Tensor(s), &allowed, nullptr).value();
  for (Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-15);
    for (Index j = 0; j < 4; ++j) {
      if (!allowed(i, j)) {
        EXPECT_EQ(p(i, j), 0.0);
      }
    }
  }
  EXPECT_EQ(p(1, 3), 1.0);
}

TEST(Tensor, MaskedSoftmaxMultiplierRenormalizes) {
  Matrix s(1, 2);
  s << 0.3, -0.4;
  Matrix m(1, 2);
  m << 0.25, 1.0;
  const Tensor mult(m);
  const Matrix p = masked_softmax(Tensor(s), nullptr, &mult).value();
  const double a = 0.25 * std::exp(0.3), b = std::exp(-0.4);
  EXPECT_NEAR(p(0, 0), a / (a + b), 1e-15);
  EXPECT_NEAR(p(0, 1), b / (a + b), 1e-15);
}

TEST(Tensor, MaskedSoftmaxFullyBlockedRowThrows) {
  BoolMatrix allowed = BoolMatrix::Constant(2, 2, true);
  allowed.row(1).setConstant(false);
  EXPECT_THROW(masked_softmax(Tensor(Matrix::Zero(2, 2)), &allowed, nullptr), ContractError);
}

TEST(Tensor, L2NormalizeZeroRowThrows) {
  EXPECT_THROW(l2_normalize_rows(Tensor(Matrix::Zero(1, 3))), NumericalError);
}

TEST(Tensor, PlaceBlockFillsOutside) {
  const Matrix a = Matrix::Constant(2, 2, 7.0);
  const Matrix out = place_block(Tensor(a), 3, 4, 1, 2, 1.0).value();
  EXPECT_EQ(out(0, 0), 1.0);
  EXPECT_EQ(out(1, 2), 7.0);
  EXPECT_EQ(out(2, 3), 7.0);
  EXPECT_EQ(out(2, 1), 1.0);
}

TEST(Tensor, GatherRowsAccumulatesRepeatedRows) {
  Tensor table(Matrix::Zero(3, 2), true);
  const Index idx[] = {1, 1, 2};
  sum(gather_rows(table, idx)).backward();
  EXPECT_EQ(table.grad()(1, 0), 2.0);
  EXPECT_EQ(table.grad()(2, 1), 1.0);
  EXPECT_EQ(table.grad()(0, 0), 0.0);
}

TEST(Tensor, ForwardAndBackwardAreDeterministic) {
  auto run = [] {
    Tensor a(testkit::random_matrix(4, 3, 9), true);
    Tensor b(testkit::random_matrix(3, 5, 10), true);
    const Tensor out = sum(gelu(matmul(a, b)));
    out.backward();
    return std::make_pair(out.item(), Matrix(a.grad()));
  };
  const auto first = run();
  const auto second = run();
  EXPECT_EQ(first.first, second.first);
  EXPECT_TRUE((first.second.array() == second.second.array()).all());
}

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto &c = testkit::op_cases()[GetParam()];
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r = c.run(seed * 7919 + 11);
    EXPECT_LT(r.max_error, 1e-4) << c.name << " seed " << seed << " leaf " << r.worst;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient,
                         ::testing::Range<std::size_t>(0, testkit::op_cases().size()),
                         [](const auto &info) { return testkit::op_cases()[info.param].name; });
