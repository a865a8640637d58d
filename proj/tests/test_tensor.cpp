#include "test_util.hpp"

#include "taskemb/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace taskemb;
using testutil::random_tensor;
using testutil::to_mat;

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor::from({2, 3}, {1, 2, 3}), std::invalid_argument);
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
}

TEST(Tensor, SoftmaxOfZerosIsUniform) {
  const Tensor s = softmax_rows(Tensor::from({1, 2}, {0, 0}));
  EXPECT_DOUBLE_EQ(s.at(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.at(0, 1), 0.5);
}

TEST(Tensor, L2NormalizeThreeFour) {
  const Tensor n = l2_normalize_rows(Tensor::from({1, 2}, {3, 4}));
  EXPECT_NEAR(n.at(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(n.at(0, 1), 0.8, 1e-15);
}

TEST(Tensor, MatmulMatchesNaiveTripleLoop) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = 1 + rng.index(16), k = 1 + rng.index(16), c = 1 + rng.index(16);
    const Tensor a = random_tensor(rng, {r, k});
    const Tensor b = random_tensor(rng, {k, c});
    const auto ref = oracle::matmul(to_mat(a), to_mat(b));
    const Tensor got = matmul(a, b);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) EXPECT_NEAR(got.at(i, j), ref[i][j], 1e-10);
    }
  }
}

TEST(Tensor, MatmulShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), std::invalid_argument);
}

TEST(Tensor, CosineExamples) {
  const Tensor same = cosine_similarity_matrix(Tensor::from({1, 2}, {0.6, 0.8}), Tensor::from({1, 2}, {0.6, 0.8}));
  EXPECT_NEAR(same.item(), 1.0, 1e-15);
  const Tensor ortho = cosine_similarity_matrix(Tensor::from({1, 2}, {1, 0}), Tensor::from({1, 2}, {0, 1}));
  EXPECT_DOUBLE_EQ(ortho.item(), 0.0);
  const Tensor c = cosine_similarity_matrix(Tensor::from({1, 2}, {1, 2}), Tensor::from({1, 2}, {2, 1}));
  EXPECT_NEAR(c.item(), 0.8, 1e-15);
}

TEST(Tensor, BackwardOfSumIsOnes) {
  const Tensor x = Tensor::from({2, 3}, {1, -2, 3, 0.5, 7, -1}, true);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Tensor, BackwardOfSquares) {
  const Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  backward(sum(x * x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 6.0);
}

TEST(Tensor, GradHasSameShapeAsData) {
  Rng rng(3);
  const Tensor x = random_tensor(rng, {4, 5}, true);
  const Tensor w = random_tensor(rng, {5, 2}, true);
  backward(sum(matmul(x, w)));
  EXPECT_EQ(x.grad().size(), x.numel());
  EXPECT_EQ(w.grad().size(), w.numel());
}

TEST(Tensor, SharedSubexpressionIsVisitedOnce) {
  const Tensor x = Tensor::from({1}, {3.0}, true);
  const Tensor y = x * x;
  backward(sum(y + y));  // d/dx 2x^2 = 4x
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Tensor, BackwardNeedsScalar) {
  const Tensor x = Tensor::from({2}, {1, 2}, true);
  EXPECT_THROW(backward(x * 2.0), std::invalid_argument);
}

TEST(Tensor, NoGradGuardBuildsNoGraph) {
  const Tensor x = Tensor::from({2}, {1, 2}, true);
  NoGradGuard guard;
  const Tensor y = x * 2.0;
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, GradCheckOfSumOfSquares) {
  Rng rng(1);
  const Tensor x = random_tensor(rng, {3, 4});
  EXPECT_LT(grad_check([](const Tensor& t) { return sum(t * t); }, x), 1e-9);
}

TEST(Tensor, GradCheckRejectsNonScalar) {
  EXPECT_THROW(grad_check([](const Tensor& t) { return t * 2.0; }, Tensor::from({2}, {1, 2})), std::invalid_argument);
}

TEST(Tensor, GradCheckInfoNceOnThreeByThree) {
  Rng rng(11);
  const Tensor s = random_tensor(rng, {3, 3});
  auto f = [](const Tensor& sim) {
    const Tensor z = sim * (1.0 / 0.5);
    return sum(logsumexp_rows(z) - diagonal(z));
  };
  EXPECT_LT(grad_check(f, s), 1e-4);
}

// Every differentiable primitive against central differences on random shapes.
TEST(Tensor, PrimitiveGradients) {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = 1 + rng.index(5), c = 2 + rng.index(5);
    const Tensor x = random_tensor(rng, {r, c});
    const Tensor other = random_tensor(rng, {r, c});
    const Tensor w = random_tensor(rng, {c, 3});
    const Tensor row = random_tensor(rng, {c});
    const Tensor gain = random_tensor(rng, {c});
    const Tensor weights = random_tensor(rng, {r, c});
    const Tensor positive = Tensor::from({r, c}, [&] {
      std::vector<double> v;
      for (std::size_t i = 0; i < r * c; ++i) v.push_back(0.5 + rng.uniform());
      return v;
    }());
    const std::vector<int> ids{0, static_cast<int>(r - 1), 0};
    Mask mask(r * c, 0);
    mask[0] = 1;

    // Weighted sums keep the test sensitive to every output coordinate.
    auto project = [&](const Tensor& y) {
      if (y.shape() == weights.shape()) return sum(y * weights);
      return sum(y * y);
    };
    const std::vector<std::pair<const char*, std::function<Tensor(const Tensor&)>>> programs{
        {"matmul", [&](const Tensor& t) { return project(matmul(t, w)); }},
        {"transpose", [&](const Tensor& t) { return project(transpose(t)); }},
        {"add", [&](const Tensor& t) { return project(t + other); }},
        {"sub", [&](const Tensor& t) { return project(other - t); }},
        {"mul", [&](const Tensor& t) { return project(t * other); }},
        {"div", [&](const Tensor& t) { return project(other / (t * t + 1.0)); }},
        {"add_row", [&](const Tensor& t) { return project(add_row(t, row)); }},
        {"exp", [&](const Tensor& t) { return project(exp(t * 0.5)); }},
        {"log", [&](const Tensor& t) { return project(log(t * t + 1.0)); }},
        {"pow", [&](const Tensor& t) { return project(pow(t * t + 1.0, 1.5)); }},
        {"gelu", [&](const Tensor& t) { return project(gelu(t)); }},
        {"sum0", [&](const Tensor& t) { return project(sum(t * t, 0)); }},
        {"sum1", [&](const Tensor& t) { return project(sum(t * t, 1)); }},
        {"mean0", [&](const Tensor& t) { return project(mean(t * t, 0)); }},
        {"mean1", [&](const Tensor& t) { return project(mean(t * t, 1)); }},
        {"softmax", [&](const Tensor& t) { return project(softmax_rows(t)); }},
        {"layer_norm", [&](const Tensor& t) { return project(layer_norm(t, gain, row, 1e-5)); }},
        {"l2_normalize", [&](const Tensor& t) { return project(l2_normalize_rows(t)); }},
        {"embedding", [&](const Tensor& t) { return project(embedding(t, ids)); }},
        {"slice", [&](const Tensor& t) { return project(slice(t, 0, r, 1, c - 1)); }},
        {"concat_rows", [&](const Tensor& t) { return project(concat_rows(std::vector<Tensor>{t, t * 2.0})); }},
        {"concat_cols", [&](const Tensor& t) { return project(concat_cols(std::vector<Tensor>{t, other * t})); }},
        {"reshape", [&](const Tensor& t) { return project(reshape(t, {c, r})); }},
        {"masked_fill", [&](const Tensor& t) { return project(masked_fill(t, mask, -3.0)); }},
        {"logsumexp", [&](const Tensor& t) { return project(logsumexp_rows(t)); }},
        {"diagonal", [&](const Tensor& t) { return project(diagonal(t)); }},
        {"cosine", [&](const Tensor& t) { return project(cosine_similarity_matrix(t, other)); }},
        {"positive", [&](const Tensor& t) { return project(log(t * t * positive + 1.0)); }},
    };
    for (const auto& [name, f] : programs) {
      if (std::string(name) == "diagonal" && r > c) continue;
      EXPECT_LT(grad_check(f, x), 1e-4) << name << " trial " << trial;
    }
  }
}

TEST(Tensor, SoftmaxRowsSumToOne) {
  Rng rng(5);
  const Tensor s = softmax_rows(random_tensor(rng, {6, 9}, false, 10.0));
  for (std::size_t i = 0; i < 6; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 9; ++j) total += s.at(i, j);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Tensor, LayerNormStandardizesRows) {
  Rng rng(6);
  const std::size_t c = 16;
  const Tensor ones = Tensor::from({c}, std::vector<double>(c, 1.0));
  const Tensor zeros = Tensor::zeros({c});
  const Tensor y = layer_norm(random_tensor(rng, {5, c}, false, 3.0), ones, zeros);
  for (std::size_t i = 0; i < 5; ++i) {
    double m = 0.0, v = 0.0;
    for (std::size_t j = 0; j < c; ++j) m += y.at(i, j) / static_cast<double>(c);
    for (std::size_t j = 0; j < c; ++j) v += (y.at(i, j) - m) * (y.at(i, j) - m) / static_cast<double>(c);
    EXPECT_LT(std::abs(m), 1e-10);
    EXPECT_NEAR(v, 1.0, 1e-8);
  }
}

TEST(Tensor, BackwardIsLinearInTheLoss) {
  Rng rng(8);
  const Tensor base = random_tensor(rng, {3, 4});
  auto f1 = [](const Tensor& t) { return sum(exp(t * 0.3)); };
  auto f2 = [](const Tensor& t) { return sum(softmax_rows(t) * t); };
  auto grad_of = [&](const std::function<Tensor(const Tensor&)>& f) {
    Tensor x = Tensor::from(base.shape(), std::vector<double>(base.data().begin(), base.data().end()), true);
    backward(f(x));
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  const auto g1 = grad_of(f1), g2 = grad_of(f2);
  const auto g12 = grad_of([&](const Tensor& t) { return f1(t) + f2(t); });
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g12[i], g1[i] + g2[i], 1e-12);
}

TEST(Tensor, StaleGradientsAreRejected) {
  const Tensor x = Tensor::from({1}, {2.0}, true);
  backward(sum(x * x));
  EXPECT_THROW(backward(sum(x * x)), std::logic_error);
}

TEST(Tensor, ZeroGradsResets) {
  std::vector<Tensor> params{Tensor::from({2}, {1, 2}, true)};
  backward(sum(params[0] * params[0]));
  EXPECT_FALSE(params[0].grad().empty());
  zero_grads(params);
  for (double g : params[0].grad()) EXPECT_EQ(g, 0.0);
}

TEST(Tensor, NonFiniteValuesAreRejected) {
  EXPECT_THROW(exp(Tensor::from({1}, {1000.0})), NumericError);
  EXPECT_THROW(Tensor::from({1}, {std::nan("")}), NumericError);
  EXPECT_THROW(log(Tensor::from({1}, {-1.0})), std::domain_error);
}
