#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pqmotion/gradcheck.hpp"
#include "pqmotion/layers.hpp"
#include "pqmotion/ops.hpp"

using namespace pqmotion;
using Mat = MatX<double>;
using V = Var<double>;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("gradcheck: linear layer") {
  Rng rng(101);
  V x = V::leaf(random_mat(5, 3, rng));
  V w = V::leaf(random_mat(3, 4, rng));
  V b = V::leaf(random_mat(1, 4, rng));
  auto loss = [&] { return sum(square_elems(rowwise_add(x * w, b))); };
  CHECK(gradient_check<double>(loss, {x, w, b}) < 1e-6);
}

TEST_CASE("gradcheck: matmul chain with transpose and hadamard") {
  Rng rng(102);
  V a = V::leaf(random_mat(4, 3, rng));
  V b = V::leaf(random_mat(4, 3, rng));
  auto loss = [&] {
    return mean(hadamard(a, b) * transpose(a - b));
  };
  CHECK(gradient_check<double>(loss, {a, b}) < 1e-6);
}

TEST_CASE("gradcheck: conv1d with stride and padding") {
  Rng rng(103);
  V x = V::leaf(random_mat(3, 17, rng));
  V w = V::leaf(random_mat(5, 3 * 4, rng));
  V b = V::leaf(random_mat(5, 1, rng));
  auto loss = [&] { return sum(square_elems(conv1d(x, w, b, 4, 2, 1))); };
  CHECK(gradient_check<double>(loss, {x, w, b}) < 1e-6);
}

TEST_CASE("gradcheck: conv_transpose1d") {
  Rng rng(104);
  V x = V::leaf(random_mat(3, 9, rng));
  V w = V::leaf(random_mat(3, 4 * 5, rng));
  V b = V::leaf(random_mat(5, 1, rng));
  auto loss = [&] {
    return sum(square_elems(conv_transpose1d(x, w, b, 4, 2, 1)));
  };
  CHECK(gradient_check<double>(loss, {x, w, b}) < 1e-6);
}

TEST_CASE("gradcheck: multihead attention, self and cross") {
  Rng rng(105);
  AttentionWeights<double> w = make_attention<double>(8, 2, rng);
  V x = V::leaf(random_mat(5, 8, rng));
  V mem = V::leaf(random_mat(7, 8, rng));
  auto loss = [&] {
    V self = multihead_attention(x, x, w);
    V cross = multihead_attention(self, mem, w);
    return mean(square_elems(cross));
  };
  std::vector<V> inputs = {x, mem, w.wq, w.bq, w.wk, w.bk,
                           w.wv, w.bv, w.wo, w.bo};
  CHECK(gradient_check<double>(loss, inputs) < 1e-6);
}

TEST_CASE("gradcheck: leaky_relu away from the kink") {
  // Spec case: gradient at x = 2.0 equals 1 within 1e-8 of central diff.
  V x = V::leaf(Mat::Constant(1, 1, 2.0));
  auto loss = [&] { return sum(leaky_relu(x, 0.2)); };
  x.zero_grad();
  loss().backward();
  CHECK(x.grad()(0, 0) == 1.0);
  CHECK(gradient_check<double>(loss, {x}, 1e-6) < 1e-8);

  Rng rng(106);
  Mat m = random_mat(4, 6, rng);
  // keep all entries away from 0 so central differences never cross the kink
  m = m.unaryExpr([](double v) { return std::abs(v) < 0.1 ? v + 0.5 : v; });
  V y = V::leaf(m);
  auto loss2 = [&] { return sum(square_elems(leaky_relu(y, 0.2))); };
  CHECK(gradient_check<double>(loss2, {y}) < 1e-6);
}

TEST_CASE("gradcheck: sigmoid, tanh and gated conv") {
  Rng rng(107);
  V x = V::leaf(random_mat(2, 11, rng));
  GatedConv1d<double> gc(2, 3, ConvGeom{3, 1, 1}, rng);
  auto loss = [&] { return mean(square_elems(gc(x))); };
  std::vector<V> inputs = {x, gc.feature.w, gc.feature.b, gc.gate.w, gc.gate.b};
  CHECK(gradient_check<double>(loss, inputs) < 1e-4);
}

TEST_CASE("gradcheck: softmax and cross entropy") {
  Rng rng(108);
  V logits = V::leaf(random_mat(6, 5, rng));
  std::vector<int> targets = {0, 4, 2, 2, 1, 3};
  auto loss = [&] { return softmax_cross_entropy(logits, targets); };
  CHECK(gradient_check<double>(loss, {logits}) < 1e-4);

  std::vector<double> weights = {1, 0, 1, 0, 1, 1};
  auto wloss = [&] { return softmax_cross_entropy(logits, targets, weights); };
  CHECK(gradient_check<double>(wloss, {logits}) < 1e-4);

  auto sloss = [&] { return sum(square_elems(softmax_rows(logits))); };
  CHECK(gradient_check<double>(sloss, {logits}) < 1e-4);
}

TEST_CASE("gradcheck: adain") {
  Rng rng(109);
  V x = V::leaf(random_mat(12, 3, rng));
  V scale = V::leaf(random_mat(1, 3, rng));
  V shift = V::leaf(random_mat(1, 3, rng));
  auto loss = [&] {
    return mean(square_elems(adain(x, scale, shift, 1e-5)));
  };
  CHECK(gradient_check<double>(loss, {x, scale, shift}) < 1e-4);
}

TEST_CASE("gradcheck: normalization layers") {
  Rng rng(110);
  V x = V::leaf(random_mat(4, 10, rng));
  V gamma = V::leaf(Mat::Ones(4, 1) + 0.1 * random_mat(4, 1, rng));
  V beta = V::leaf(random_mat(4, 1, rng));

  auto time_loss = [&] {
    return mean(square_elems(norm_time_train(x, gamma, beta, 1e-5)));
  };
  CHECK(gradient_check<double>(time_loss, {x, gamma, beta}) < 1e-4);

  auto step_loss = [&] {
    return mean(square_elems(norm_step(x, gamma, beta, 1e-5)));
  };
  CHECK(gradient_check<double>(step_loss, {x, gamma, beta}) < 1e-4);

  VecX<double> rm = VecX<double>::Zero(4);
  VecX<double> rv = VecX<double>::Ones(4);
  auto eval_loss = [&] {
    return mean(square_elems(norm_time_eval(x, gamma, beta, rm, rv, 1e-5)));
  };
  CHECK(gradient_check<double>(eval_loss, {x, gamma, beta}) < 1e-6);
}

TEST_CASE("gradcheck: gather, slices and concatenation") {
  Rng rng(111);
  V table = V::leaf(random_mat(7, 4, rng));
  V x = V::leaf(random_mat(6, 4, rng));
  auto loss = [&] {
    V g = gather_rows(table, {1, 1, 6, 0});
    V top = slice_rows(x, 0, 4) + g;
    V cat = concat_cols<double>({top, slice_rows(x, 2, 4)});
    V stacked = concat_rows<double>({cat, cat * 0.5});
    return mean(square_elems(stacked));
  };
  CHECK(gradient_check<double>(loss, {table, x}) < 1e-6);
}

TEST_CASE("gradcheck: residual block end to end") {
  Rng rng(112);
  ResidualBlock<double> block(3, NormMode::PerChannel, 0.2, rng);
  V x = V::leaf(random_mat(3, 12, rng));
  auto loss = [&] { return mean(square_elems(block(x, true))); };
  ParamRegistry<double> reg;
  block.collect("rb", reg);
  std::vector<V> inputs = reg.trainable_vars();
  inputs.push_back(x);
  CHECK(gradient_check<double>(loss, inputs, 1e-5, 12) < 1e-4);
}

TEST_CASE("gradcheck: constant function has exactly zero gradient") {
  Rng rng(113);
  V x = V::leaf(random_mat(3, 3, rng));
  auto loss = [&] { return Var<double>::scalar(4.5); };
  CHECK(gradient_check<double>(loss, {x}) == 0.0);
}
