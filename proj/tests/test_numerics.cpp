#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "xggm/gradcheck.hpp"
#include "xggm/matrix.hpp"
#include "xggm/rng.hpp"
#include "xggm/tape.hpp"

using namespace xggm;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double sigma = 1.0) {
  return gaussian_matrix(rng, r, c, 0.0, sigma);
}

}  // namespace

TEST(PackUpper, DefinitionalOrder) {
  const double a = 0.3, b = 0.7, c = -0.2;
  Matrix r = {{1, a, b}, {a, 1, c}, {b, c, 1}};
  Matrix packed = pack_upper(r);
  ASSERT_EQ(packed.rows(), 3u);
  EXPECT_EQ(packed.at(0), a);
  EXPECT_EQ(packed.at(1), b);
  EXPECT_EQ(packed.at(2), c);
}

TEST(PackUpper, SingleElement) {
  const double x = 0.42;
  Matrix r = {{1, x}, {x, 1}};
  Matrix packed = pack_upper(r);
  ASSERT_EQ(packed.rows(), 1u);
  EXPECT_EQ(packed.at(0), x);
}

TEST(PackUpper, RoundTripExact) {
  Rng rng(11, 0);
  for (std::size_t n : {2u, 3u, 5u, 8u}) {
    Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      r(i, i) = 1.0;
      for (std::size_t j = i + 1; j < n; ++j) r(i, j) = r(j, i) = rng.uniform();
    }
    Matrix back = unpack_upper(pack_upper(r), n);
    EXPECT_EQ(back.data(), r.data());
  }
}

TEST(PackUpper, NonSquareThrows) {
  Matrix r(2, 3);
  EXPECT_THROW(pack_upper(r), DimensionError);
}

TEST(UnpackUpper, Definitional) {
  Matrix r = Matrix::column({0.1, 0.2, 0.3});
  Matrix m = unpack_upper(r, 3);
  Matrix expected = {{1, 0.1, 0.2}, {0.1, 1, 0.3}, {0.2, 0.3, 1}};
  EXPECT_EQ(m.data(), expected.data());
}

TEST(UnpackUpper, ZerosGiveIdentity) {
  Matrix m = unpack_upper(Matrix(3, 1), 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m(i, j), i == j ? 1.0 : 0.0);
}

TEST(UnpackUpper, VectorRoundTrip) {
  Rng rng(12, 0);
  Matrix v = random_matrix(rng, upper_triangle_size(6), 1);
  Matrix back = pack_upper(unpack_upper(v, 6));
  EXPECT_EQ(back.data(), v.data());
}

TEST(UnpackUpper, LengthMismatchThrows) {
  EXPECT_THROW(unpack_upper(Matrix(4, 1), 3), DimensionError);
}

TEST(GaussianMatrix, SigmaZeroGivesMean) {
  Rng rng(5, 1);
  Matrix m = gaussian_matrix(rng, 4, 4, 2.5, 0.0);
  for (std::size_t k = 0; k < m.size(); ++k) EXPECT_EQ(m.at(k), 2.5);
}

TEST(GaussianMatrix, Deterministic) {
  Rng a(99, 7), b(99, 7);
  Matrix ma = gaussian_matrix(a, 5, 3, 0.0, 1.0);
  Matrix mb = gaussian_matrix(b, 5, 3, 0.0, 1.0);
  EXPECT_EQ(ma.data(), mb.data());
}

TEST(GaussianMatrix, DistinctStreamsDiffer) {
  Rng a(99, 7), b(99, 8);
  Matrix ma = gaussian_matrix(a, 5, 3, 0.0, 1.0);
  Matrix mb = gaussian_matrix(b, 5, 3, 0.0, 1.0);
  EXPECT_NE(ma.data(), mb.data());
}

TEST(GaussianMatrix, StatisticalOracle) {
  Rng rng(2024, 3);
  const std::size_t n = 100000;
  Matrix m = gaussian_matrix(rng, n, 1, 0.0, 1.0);
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) mean += m.at(k);
  mean /= n;
  double var = 0.0;
  for (std::size_t k = 0; k < n; ++k) var += (m.at(k) - mean) * (m.at(k) - mean);
  var /= n;
  const double sd = std::sqrt(var);
  EXPECT_GE(mean, -0.02);
  EXPECT_LE(mean, 0.02);
  EXPECT_GE(sd, 0.99);
  EXPECT_LE(sd, 1.01);
}

TEST(GaussianMatrix, NegativeSigmaThrows) {
  Rng rng(1, 0);
  EXPECT_THROW(gaussian_matrix(rng, 2, 2, 0.0, -1.0), ParameterError);
}

TEST(Rng, UniformInHalfOpenUnit) {
  Rng rng(3, 3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Tape, BackwardMatchesFiniteDifferences) {
  Rng rng(17, 0);
  ParamStore params;
  params.insert("W", random_matrix(rng, 2, 2));
  const Matrix x = random_matrix(rng, 2, 1);
  auto builder = [&x](Tape& t, BoundParams& p) {
    return t.sum_all(t.sigmoid(t.matmul(p("W"), t.constant(x))));
  };
  auto report = grad_check(builder, params, 1e-5);
  EXPECT_LE(report.max_rel_err, 1e-4);
}

TEST(Tape, UnusedLeafGetsZeroGradient) {
  Tape tape;
  Var w = tape.param("used", Matrix(2, 2, 1.0));
  tape.param("unused", Matrix(3, 1, 5.0));
  Var loss = tape.mean_all(w);
  GradMap grads = tape.backward(loss);
  ASSERT_TRUE(grads.count("unused"));
  const Matrix& g = grads.at("unused");
  ASSERT_EQ(g.rows(), 3u);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(g.at(k), 0.0);
}

TEST(Tape, MeanGradientIsOneOverN) {
  Tape tape;
  Var w = tape.param("theta", Matrix(2, 3, 0.7));
  GradMap grads = tape.backward(tape.mean_all(w));
  const Matrix& g = grads.at("theta");
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_DOUBLE_EQ(g.at(k), 1.0 / 6.0);
}

TEST(Tape, NonScalarLossThrows) {
  Tape tape;
  Var w = tape.param("w", Matrix(2, 2, 1.0));
  EXPECT_THROW(tape.backward(w), ContractError);
}

TEST(Tape, SigmoidRangeAndReluSign) {
  Rng rng(23, 0);
  Tape tape;
  Var a = tape.constant(random_matrix(rng, 6, 6, 5.0));
  Var s = tape.sigmoid(a);
  Var r = tape.relu(a);
  for (std::size_t k = 0; k < s.value().size(); ++k) {
    EXPECT_GT(s.value().at(k), 0.0);
    EXPECT_LT(s.value().at(k), 1.0);
    EXPECT_GE(r.value().at(k), 0.0);
  }
}

TEST(Tape, CrossTapeVariableRejected) {
  Tape a, b;
  Var va = a.constant(Matrix(1, 1, 1.0));
  Var vb = b.constant(Matrix(1, 1, 2.0));
  EXPECT_THROW(a.add(va, vb), ContractError);
}

// One finite-difference pass through every differentiable primitive.
TEST(Tape, AllPrimitivesPassGradientCheck) {
  Rng rng(31, 0);
  const std::size_t n = 4, d = 3;

  ParamStore params;
  params.insert("A", random_matrix(rng, n, d));
  params.insert("B", random_matrix(rng, d, n));
  params.insert("v", random_matrix(rng, 1, d));
  params.insert("s", random_matrix(rng, n, 1, 0.5));
  params.insert("W", random_matrix(rng, n * d, d, 0.5));
  params.insert("bias", random_matrix(rng, n, d, 0.5));
  params.insert("R", [&] {
    Matrix r = random_matrix(rng, upper_triangle_size(n), 1, 0.3);
    return r;
  }());
  params.insert("q", random_matrix(rng, n, n, 0.4));

  struct Case {
    const char* name;
    LossBuilder builder;
  };
  const std::vector<Case> cases = {
      {"matmul", [](Tape& t, BoundParams& p) { return t.mean_all(t.matmul(p("A"), p("B"))); }},
      {"transpose", [](Tape& t, BoundParams& p) { return t.sum_all(t.transpose(p("A"))); }},
      {"add", [](Tape& t, BoundParams& p) { return t.sum_sq(t.add(p("A"), p("bias"))); }},
      {"sub", [](Tape& t, BoundParams& p) { return t.sum_sq(t.sub(p("A"), p("bias"))); }},
      {"mul", [](Tape& t, BoundParams& p) { return t.sum_all(t.mul(p("A"), p("bias"))); }},
      {"add_rowvec",
       [](Tape& t, BoundParams& p) { return t.sum_sq(t.add_rowvec(p("A"), p("v"))); }},
      {"scale", [](Tape& t, BoundParams& p) { return t.sum_all(t.scale(p("A"), -2.5)); }},
      {"add_const", [](Tape& t, BoundParams& p) { return t.sum_sq(t.add_const(p("A"), 0.3)); }},
      {"sigmoid", [](Tape& t, BoundParams& p) { return t.sum_all(t.sigmoid(p("A"))); }},
      {"relu", [](Tape& t, BoundParams& p) { return t.sum_all(t.relu(p("A"))); }},
      {"log",
       [](Tape& t, BoundParams& p) { return t.sum_all(t.log(t.add_const(t.abs(p("A")), 1.0))); }},
      {"reciprocal",
       [](Tape& t, BoundParams& p) {
         return t.sum_all(t.reciprocal(t.add_const(t.abs(p("A")), 1.0)));
       }},
      {"abs", [](Tape& t, BoundParams& p) { return t.sum_all(t.abs(p("A"))); }},
      {"max_const", [](Tape& t, BoundParams& p) { return t.sum_all(t.max_const(p("A"), 0.1)); }},
      {"clamp_const",
       [](Tape& t, BoundParams& p) { return t.sum_all(t.clamp_const(p("A"), -0.5, 0.5)); }},
      {"mean_all", [](Tape& t, BoundParams& p) { return t.mean_all(p("A")); }},
      {"sum_sq", [](Tape& t, BoundParams& p) { return t.sum_sq(p("A")); }},
      {"mean_rows", [](Tape& t, BoundParams& p) { return t.sum_sq(t.mean_rows(p("A"))); }},
      {"row_sums", [](Tape& t, BoundParams& p) { return t.sum_sq(t.row_sums(p("A"))); }},
      {"scale_rows",
       [](Tape& t, BoundParams& p) { return t.sum_all(t.scale_rows(p("A"), p("s"))); }},
      {"scale_by_scalar",
       [](Tape& t, BoundParams& p) {
         return t.sum_all(t.scale_by_scalar(p("A"), t.mean_all(p("s"))));
       }},
      {"broadcast_scalar",
       [](Tape& t, BoundParams& p) {
         return t.sum_sq(t.broadcast_scalar(t.mean_all(p("s")), 3, 2));
       }},
      {"pack_upper", [](Tape& t, BoundParams& p) { return t.sum_sq(t.pack_upper(p("q"))); }},
      {"unpack_upper",
       [n](Tape& t, BoundParams& p) { return t.sum_sq(t.unpack_upper(p("R"), n)); }},
      {"per_node_linear",
       [](Tape& t, BoundParams& p) {
         return t.sum_sq(t.per_node_linear(p("A"), p("W"), p("bias")));
       }},
      {"reshape",
       [n, d](Tape& t, BoundParams& p) { return t.sum_sq(t.reshape(p("A"), n * d, 1)); }},
  };

  for (const auto& c : cases) {
    auto report = grad_check(c.builder, params, 1e-5);
    EXPECT_LE(report.max_rel_err, 1e-4) << "primitive: " << c.name;
  }
}

TEST(GradCheck, QuadraticAnalytic) {
  ParamStore params;
  params.insert("theta", Matrix(1, 1, 3.0));
  auto builder = [](Tape& t, BoundParams& p) { return t.mul(p("theta"), p("theta")); };
  auto report = grad_check(builder, params, 1e-5);
  EXPECT_LE(report.max_rel_err, 1e-9);
}

TEST(GradCheck, ConstantFunctionIsExactlyZeroError) {
  ParamStore params;
  params.insert("theta", Matrix(2, 2, 1.0));
  auto builder = [](Tape& t, BoundParams& p) {
    p("theta");  // registered but unused
    return t.constant(Matrix(1, 1, 4.2));
  };
  auto report = grad_check(builder, params, 1e-5);
  EXPECT_EQ(report.max_rel_err, 0.0);
}

TEST(GradCheck, SigmoidAtZero) {
  ParamStore params;
  params.insert("theta", Matrix(1, 1, 0.0));
  auto builder = [](Tape& t, BoundParams& p) { return t.sigmoid(p("theta")); };

  // The analytic derivative itself: sigma'(0) = 0.25.
  Tape tape;
  BoundParams bound(tape, params);
  Var loss = builder(tape, bound);
  EXPECT_DOUBLE_EQ(tape.backward(loss).at("theta").at(0), 0.25);

  auto report = grad_check(builder, params, 1e-5);
  EXPECT_LE(report.max_rel_err, 1e-9);
}

TEST(GradCheck, InjectedErrorIsDetected) {
  ParamStore params;
  params.insert("theta", Matrix(1, 1, 3.0));
  auto builder = [](Tape& t, BoundParams& p) { return t.mul(p("theta"), p("theta")); };
  auto report = grad_check(builder, params, 1e-5, /*inject_error=*/1.0);
  EXPECT_GT(report.max_rel_err, 0.1);
}

TEST(GradCheck, NonFiniteLossThrows) {
  ParamStore params;
  params.insert("theta", Matrix(1, 1, 0.0));
  auto builder = [](Tape& t, BoundParams& p) {
    return t.log(p("theta"));  // log(0) guards throw
  };
  EXPECT_THROW(grad_check(builder, params, 1e-5), NumericError);
}
