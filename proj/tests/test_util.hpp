#pragma once

#include "oracles.hpp"

#include "taskemb/rng.hpp"
#include "taskemb/tensor.hpp"

namespace testutil {

inline taskemb::Tensor random_tensor(taskemb::Rng& rng, taskemb::Shape shape, bool requires_grad = false,
                                     double scale = 1.0) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, scale);
  return taskemb::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline oracle::Mat to_mat(const taskemb::Tensor& t) {
  oracle::Mat m(t.rows(), oracle::Vec(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  }
  return m;
}

inline oracle::Vec to_vec(const taskemb::Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace testutil

#include "taskemb/encoder.hpp"

namespace testutil {

inline std::vector<std::string> tiny_corpus() {
  return {"the cat sat on the mat", "a dog ran in the park", "stars shine in the night sky",
          "the chef cooked a warm meal", "boats sail across the sea", "music fills the quiet room"};
}

inline taskemb::ModelConfig tiny_config(std::size_t vocab_size, std::uint64_t seed = 1) {
  taskemb::ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_seq_len = 32;
  c.mrl_dims = {4, 8, 16};
  c.seed = seed;
  return c;
}

inline taskemb::EncoderModel tiny_model(std::uint64_t seed = 1) {
  const auto corpus = tiny_corpus();
  taskemb::Vocab vocab = taskemb::Vocab::build(corpus);
  const std::size_t n = vocab.size();
  return taskemb::EncoderModel(tiny_config(n, seed), std::move(vocab));
}

/// Max |a - b| over two equal-shape tensors.
inline double max_abs_diff(const taskemb::Tensor& a, const taskemb::Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

}  // namespace testutil
