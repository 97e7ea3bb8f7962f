#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pqmotion/layers.hpp"
#include "pqmotion/ops.hpp"
#include "pqmotion/rng.hpp"
#include "pqmotion/tensor.hpp"

using namespace pqmotion;
using Mat = MatX<double>;
using V = Var<double>;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

Mat row(std::initializer_list<double> xs) {
  Mat m(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) m(0, i++) = x;
  return m;
}

}  // namespace

TEST_CASE("conv1d identity kernel k1 s1 p0") {
  V x = V::constant(row({1, 2, 3}));
  V w = V::constant(Mat::Ones(1, 1));
  V y = conv1d(x, w, 1, 1, 0);
  CHECK(y.value() == x.value());
}

TEST_CASE("conv1d centered delta kernel k3 s1 p1 with zero padding") {
  V x = V::constant(row({1, 2, 3}));
  V w = V::constant(row({0, 1, 0}));
  V y = conv1d(x, w, 3, 1, 1);
  CHECK(y.value() == x.value());
}

TEST_CASE("conv1d sliding sum k2 s2 p0") {
  V x = V::constant(row({1, 2, 3, 4}));
  V w = V::constant(row({1, 1}));
  V y = conv1d(x, w, 2, 2, 0);
  REQUIRE(y.cols() == 2);
  CHECK(y.value()(0, 0) == doctest::Approx(3.0));
  CHECK(y.value()(0, 1) == doctest::Approx(7.0));
}

TEST_CASE("conv1d identity kernel is the identity map on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    int channels = rng.uniform_int(1, 5);
    int frames = rng.uniform_int(1, 40);
    V x = V::constant(random_mat(channels, frames, rng));
    V w = V::constant(Mat::Identity(channels, channels));
    V y = conv1d(x, w, 1, 1, 0);
    CHECK((y.value() - x.value()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("conv1d output length formula") {
  Rng rng(5);
  V x = V::constant(random_mat(2, 13, rng));
  V w = V::constant(random_mat(3, 2 * 4, rng));
  V y = conv1d(x, w, 4, 2, 1);
  CHECK(y.rows() == 3);
  CHECK(y.cols() == (13 + 2 - 4) / 2 + 1);
}

TEST_CASE("conv1d channel mismatch throws") {
  Rng rng(7);
  V x = V::constant(random_mat(3, 8, rng));
  V w = V::constant(random_mat(4, 2 * 3, rng));  // expects 2 input channels
  CHECK_THROWS_AS(conv1d(x, w, 3, 1, 1), std::invalid_argument);
}

TEST_CASE("conv_transpose1d doubles even lengths at k4 s2 p1") {
  Rng rng(9);
  V x = V::constant(random_mat(3, 8, rng));
  V w = V::constant(random_mat(3, 4 * 5, rng));
  V y = conv_transpose1d(x, w, V(), 4, 2, 1);
  CHECK(y.rows() == 5);
  CHECK(y.cols() == 16);
}

TEST_CASE("leaky_relu branches and slope validity") {
  V x = V::constant(row({1.0, -1.0}));
  V y = leaky_relu(x, 0.2);
  CHECK(y.value()(0, 0) == doctest::Approx(1.0));
  CHECK(y.value()(0, 1) == doctest::Approx(-0.2));
  CHECK_THROWS_AS(leaky_relu(x, 1.5), std::invalid_argument);
}

TEST_CASE("softmax_cross_entropy uniform logits over 128 classes") {
  V logits = V::constant(Mat::Zero(3, 128));
  V loss = softmax_cross_entropy(logits, {0, 17, 127});
  CHECK(loss.item() == doctest::Approx(std::log(128.0)).epsilon(1e-12));
}

TEST_CASE("softmax_cross_entropy saturated correct class") {
  Mat logits = Mat::Zero(1, 4);
  logits(0, 2) = 1e3;
  V loss = softmax_cross_entropy(V::constant(logits), {2});
  CHECK(loss.item() >= 0.0);
  CHECK(loss.item() < 1e-10);
}

TEST_CASE("softmax_cross_entropy two-class hand computation") {
  V logits = V::constant(row({1.0, 2.0}));
  V loss = softmax_cross_entropy(logits, {1});
  CHECK(loss.item() ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("softmax_cross_entropy is non-negative and detects bad targets") {
  Rng rng(3);
  V logits = V::constant(random_mat(5, 7, rng));
  CHECK(softmax_cross_entropy(logits, {0, 1, 2, 3, 4}).item() >= 0.0);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {0, 1, 2, 3, 7}),
                  std::invalid_argument);
}

TEST_CASE("adain passes through already-normalized input with unit style") {
  Rng rng(21);
  const int l = 64, d = 3;
  Mat x = random_mat(l, d, rng);
  for (int c = 0; c < d; ++c) {
    double mu = x.col(c).mean();
    double sd = std::sqrt((x.col(c).array() - mu).square().sum() / l);
    x.col(c) = (x.col(c).array() - mu) / sd;
  }
  V y = adain(V::constant(x), V::constant(Mat::Ones(1, d)),
              V::constant(Mat::Zero(1, d)), 1e-8);
  CHECK((y.value() - x).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("adain maps constant channels to the shift") {
  Mat x = Mat::Constant(16, 2, 3.25);
  Mat shift(1, 2);
  shift << -1.5, 0.75;
  V y = adain(V::constant(x), V::constant(Mat::Ones(1, 2)),
              V::constant(shift), 1e-5);
  for (int c = 0; c < 2; ++c)
    for (int n = 0; n < 16; ++n)
      CHECK(y.value()(n, c) == doctest::Approx(shift(0, c)).epsilon(1e-12));
}

TEST_CASE("adain output statistics match scale and shift") {
  Rng rng(33);
  const int l = 64, d = 5;
  const double eps = 1e-5;
  Mat x = random_mat(l, d, rng);
  Mat scale(1, d), shift(1, d);
  for (int c = 0; c < d; ++c) {
    scale(0, c) = rng.uniform(0.5, 2.0);
    shift(0, c) = rng.normal();
  }
  V y = adain(V::constant(x), V::constant(scale), V::constant(shift), eps);
  for (int c = 0; c < d; ++c) {
    double var_in = (x.col(c).array() - x.col(c).mean()).square().sum() / l;
    REQUIRE(var_in > 10 * eps);
    double mu = y.value().col(c).mean();
    double sd = std::sqrt((y.value().col(c).array() - mu).square().sum() / l);
    CHECK(mu == doctest::Approx(shift(0, c)).epsilon(1e-6));
    CHECK(sd == doctest::Approx(scale(0, c)).epsilon(1e-6));
  }
}

TEST_CASE("attention with a single key returns the projected value row") {
  Rng rng(41);
  const int d = 4;
  AttentionWeights<double> w = make_attention<double>(d, 2, rng);
  V q = V::constant(random_mat(5, d, rng));
  V kv = V::constant(random_mat(1, d, rng));
  V out = multihead_attention(q, kv, w);
  // softmax over one element is 1, so every query receives the same output.
  Mat vrow = kv.value() * w.wv.value();
  vrow.array() += 0.0;
  Mat expect = (vrow + w.bv.value()) * w.wo.value() + w.bo.value();
  for (int r = 0; r < 5; ++r)
    CHECK((out.value().row(r) - expect.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention gives identical weight to duplicate key rows") {
  Rng rng(43);
  const int d = 4;
  AttentionWeights<double> w = make_attention<double>(d, 1, rng);
  Mat kv = random_mat(2, d, rng);
  kv.row(1) = kv.row(0);  // duplicates
  V q = V::constant(random_mat(1, d, rng));

  // With duplicate keys the attention output must equal attending to a
  // single copy of the row.
  V out2 = multihead_attention(q, V::constant(kv), w);
  V out1 = multihead_attention(q, V::constant(Mat(kv.topRows(1))), w);
  CHECK((out2.value() - out1.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention 2x2 hand computation") {
  const int d = 2;
  AttentionWeights<double> w;
  w.heads = 1;
  w.wq = V::leaf(Mat::Identity(d, d));
  w.wk = V::leaf(Mat::Identity(d, d));
  w.wv = V::leaf(Mat::Identity(d, d));
  w.wo = V::leaf(Mat::Identity(d, d));
  w.bq = V::leaf(Mat::Zero(1, d));
  w.bk = V::leaf(Mat::Zero(1, d));
  w.bv = V::leaf(Mat::Zero(1, d));
  w.bo = V::leaf(Mat::Zero(1, d));

  Mat x(2, 2);
  x << 1.0, 0.0, 0.0, 1.0;
  V out = multihead_attention(V::constant(x), V::constant(x), w);

  const double s = 1.0 / std::sqrt(2.0);
  // scores = x x^T / sqrt(2): row 0 = [s, 0], row 1 = [0, s]
  double a = std::exp(s) / (std::exp(s) + 1.0);
  Mat expect(2, 2);
  expect << a, 1.0 - a, 1.0 - a, a;
  CHECK((out.value() - expect).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("attention rejects d_model not divisible by heads") {
  Rng rng(47);
  AttentionWeights<double> w = make_attention<double>(4, 2, rng);
  w.heads = 3;
  V x = V::constant(random_mat(2, 4, rng));
  CHECK_THROWS_AS(multihead_attention(x, x, w), std::invalid_argument);
}

TEST_CASE("structural ops round values through") {
  Rng rng(51);
  Mat m = random_mat(6, 4, rng);
  V x = V::constant(m);
  CHECK(slice_rows(x, 2, 3).value() == Mat(m.middleRows(2, 3)));
  CHECK(slice_cols(x, 1, 2).value() == Mat(m.middleCols(1, 2)));
  V cat = concat_rows<double>({slice_rows(x, 0, 3), slice_rows(x, 3, 3)});
  CHECK(cat.value() == m);
  V catc = concat_cols<double>({slice_cols(x, 0, 2), slice_cols(x, 2, 2)});
  CHECK(catc.value() == m);
  V g = gather_rows(x, {5, 0, 0});
  CHECK(g.value().row(0) == m.row(5));
  CHECK(g.value().row(1) == m.row(0));
  CHECK(g.value().row(2) == m.row(0));
}

TEST_CASE("straight_through passes gradient to its input unchanged") {
  Mat z0(2, 2);
  z0 << 1, 2, 3, 4;
  V z = V::leaf(z0);
  Mat q(2, 2);
  q << 0, 0, 1, 1;
  V st = straight_through(z, q);
  CHECK(st.value() == q);
  V loss = sum(hadamard(st, st));
  loss.backward();
  // d/dst (sum st^2) = 2 st, copied through to z
  CHECK((z.grad() - Mat(2.0 * q)).cwiseAbs().maxCoeff() == 0.0);
}
