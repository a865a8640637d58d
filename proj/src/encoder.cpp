#include "taskemb/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace taskemb {

void ModelConfig::validate() const {
  if (vocab_size < 4) throw std::invalid_argument("vocab_size must be at least 4");
  if (d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw std::invalid_argument("d_model must be divisible by n_heads");
  if (head_dim() % 2 != 0) throw std::invalid_argument("head dimension must be even for rotary embeddings");
  if (max_seq_len == 0) throw std::invalid_argument("max_seq_len must be positive");
  if (!(rope_base_train > 0.0) || !(rope_base_infer > 0.0)) throw std::invalid_argument("rotary bases must be positive");
  if (lora_rank < 1) throw std::invalid_argument("lora_rank must be at least 1");
  if (mrl_dims.empty()) throw std::invalid_argument("mrl_dims must not be empty");
  for (std::size_t i = 0; i < mrl_dims.size(); ++i) {
    if (mrl_dims[i] < 1 || mrl_dims[i] > d_model) throw std::invalid_argument("mrl_dims entries must lie in [1, d_model]");
    if (i > 0 && mrl_dims[i] <= mrl_dims[i - 1]) throw std::invalid_argument("mrl_dims must be strictly ascending");
  }
  if (mrl_dims.back() != d_model) throw std::invalid_argument("the last mrl_dims entry must equal d_model");
}

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::None: return "none";
    case TaskKind::RetrievalQuery: return "retrieval.query";
    case TaskKind::RetrievalPassage: return "retrieval.passage";
    case TaskKind::Separation: return "separation";
    case TaskKind::Classification: return "classification";
    case TaskKind::TextMatching: return "text-matching";
  }
  return "none";
}

TaskKind parse_task(std::string_view name) {
  if (name == "none") return TaskKind::None;
  for (TaskKind t : kAdapterTasks) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown task '" + std::string(name) +
                              "'; valid: retrieval.query, retrieval.passage, separation, classification, "
                              "text-matching");
}

std::size_t LoraAdapter::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, pair] : matrices) n += pair.a.numel() + pair.b.numel();
  return n;
}

std::vector<Tensor> LoraAdapter::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, pair] : matrices) {
    out.push_back(pair.a);
    out.push_back(pair.b);
  }
  return out;
}

namespace {

Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<Scalar> v(n);
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor constant(std::size_t n, double value) { return Tensor::from({n}, std::vector<Scalar>(n, value), true); }

std::uint64_t task_stream(TaskKind task) { return 0x5eed0000ULL + static_cast<std::uint64_t>(task); }

}  // namespace

EncoderModel::EncoderModel(ModelConfig config, Vocab vocab) : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  if (config_.vocab_size != vocab_.size()) {
    throw std::invalid_argument("config vocab_size " + std::to_string(config_.vocab_size) +
                                " does not match vocabulary of " + std::to_string(vocab_.size()));
  }
  Rng rng(config_.seed);
  const std::size_t d = config_.d_model;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(d));
  token_embedding_ = gaussian({config_.vocab_size, d}, 1.0, rng);
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    LayerWeights w;
    w.ln1_gain = constant(d, 1.0);
    w.ln1_bias = constant(d, 0.0);
    w.wq = gaussian({d, d}, proj_std, rng);
    w.wk = gaussian({d, d}, proj_std, rng);
    w.wv = gaussian({d, d}, proj_std, rng);
    w.wo = gaussian({d, d}, proj_std, rng);
    w.ln2_gain = constant(d, 1.0);
    w.ln2_bias = constant(d, 0.0);
    w.w1 = gaussian({config_.d_ff, d}, proj_std, rng);
    w.b1 = constant(config_.d_ff, 0.0);
    w.w2 = gaussian({d, config_.d_ff}, 1.0 / std::sqrt(static_cast<double>(config_.d_ff)), rng);
    w.b2 = constant(d, 0.0);
    layers_.push_back(std::move(w));
  }
  final_gain_ = constant(d, 1.0);
  final_bias_ = constant(d, 0.0);
  mlm_bias_ = constant(config_.vocab_size, 0.0);
}

std::vector<std::pair<std::string, Tensor>> EncoderModel::named_base_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out{{"embedding/token", token_embedding_}};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + "/";
    const auto& w = layers_[l];
    out.insert(out.end(), {{p + "ln1/gain", w.ln1_gain},
                           {p + "ln1/bias", w.ln1_bias},
                           {p + "attn/q", w.wq},
                           {p + "attn/k", w.wk},
                           {p + "attn/v", w.wv},
                           {p + "attn/o", w.wo},
                           {p + "ln2/gain", w.ln2_gain},
                           {p + "ln2/bias", w.ln2_bias},
                           {p + "ffn/w1", w.w1},
                           {p + "ffn/b1", w.b1},
                           {p + "ffn/w2", w.w2},
                           {p + "ffn/b2", w.b2}});
  }
  out.emplace_back("final_ln/gain", final_gain_);
  out.emplace_back("final_ln/bias", final_bias_);
  out.emplace_back("mlm/bias", mlm_bias_);
  return out;
}

std::vector<Tensor> EncoderModel::base_parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_base_parameters()) out.push_back(t);
  return out;
}

const LoraAdapter& EncoderModel::adapter(TaskKind task) const {
  auto it = adapters_.find(task);
  if (it == adapters_.end()) throw std::invalid_argument("model has no adapter for task " + to_string(task));
  return it->second;
}

LoraAdapter& EncoderModel::adapter(TaskKind task) {
  auto it = adapters_.find(task);
  if (it == adapters_.end()) throw std::invalid_argument("model has no adapter for task " + to_string(task));
  return it->second;
}

LoraAdapter& EncoderModel::add_adapter(TaskKind task) {
  if (task == TaskKind::None) throw std::invalid_argument("the base model takes no adapter");
  Rng rng(Rng::mix(config_.seed ^ task_stream(task)));
  const std::size_t r = config_.lora_rank, d = config_.d_model;
  auto make = [&](std::size_t d_in, std::size_t d_out) {
    LoraPair p;
    p.a = gaussian({r, d_in}, 0.02, rng);
    p.b = Tensor::from({d_out, r}, std::vector<Scalar>(d_out * r, 0.0), true);
    return p;
  };
  LoraAdapter adapter;
  adapter.matrices.emplace("embedding/token", make(config_.vocab_size, d));
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    for (const char* m : {"q", "k", "v", "o"}) {
      adapter.matrices.emplace("layer" + std::to_string(l) + "/" + m, make(d, d));
    }
  }
  adapters_[task] = std::move(adapter);
  return adapters_[task];
}

void EncoderModel::set_adapter(TaskKind task, LoraAdapter adapter) {
  if (task == TaskKind::None) throw std::invalid_argument("the base model takes no adapter");
  adapters_[task] = std::move(adapter);
}

std::vector<std::pair<std::string, Tensor>> EncoderModel::named_adapter_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [task, adapter] : adapters_) {
    for (const auto& [name, pair] : adapter.matrices) {
      const std::string prefix = "adapter/" + to_string(task) + "/" + name + "/";
      out.emplace_back(prefix + "A", pair.a);
      out.emplace_back(prefix + "B", pair.b);
    }
  }
  return out;
}

void EncoderModel::set_base_trainable(bool on) {
  for (auto& t : base_parameters()) t.set_requires_grad(on);
}

namespace {

Tensor deep_copy(const Tensor& t) {
  return Tensor::from(t.shape(), std::vector<Scalar>(t.data().begin(), t.data().end()), t.requires_grad());
}

}  // namespace

EncoderModel EncoderModel::clone() const {
  EncoderModel copy(config_, vocab_);
  auto src = named_base_parameters();
  auto dst = copy.named_base_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto values = src[i].second.data();
    auto target = dst[i].second.mutable_data();
    std::copy(values.begin(), values.end(), target.begin());
    dst[i].second.set_requires_grad(src[i].second.requires_grad());
  }
  for (const auto& [task, adapter] : adapters_) {
    LoraAdapter a;
    for (const auto& [name, pair] : adapter.matrices) a.matrices[name] = {deep_copy(pair.a), deep_copy(pair.b)};
    copy.adapters_[task] = std::move(a);
  }
  copy.stage_completed = stage_completed;
  return copy;
}

TokenBatch TokenBatch::pad(const std::vector<std::vector<int>>& sequences, std::size_t min_len) {
  if (sequences.empty()) throw std::invalid_argument("cannot build an empty token batch");
  TokenBatch b;
  b.batch = sequences.size();
  b.len = std::max<std::size_t>(min_len, 1);
  for (const auto& s : sequences) b.len = std::max(b.len, s.size());
  b.ids.assign(b.batch * b.len, Vocab::kPad);
  b.mask.assign(b.batch * b.len, 0);
  for (std::size_t i = 0; i < b.batch; ++i) {
    for (std::size_t j = 0; j < sequences[i].size(); ++j) {
      b.ids[i * b.len + j] = sequences[i][j];
      b.mask[i * b.len + j] = 1;
    }
  }
  return b;
}

RotatedPair apply_rope(const Tensor& q, const Tensor& k, std::span<const std::size_t> positions, std::size_t head_dim,
                       double base) {
  if (head_dim == 0 || head_dim % 2 != 0) throw std::invalid_argument("apply_rope: head dimension must be even");
  if (!(base > 0.0)) throw std::invalid_argument("apply_rope: base must be positive");
  if (q.shape() != k.shape() || q.rank() != 2) throw std::invalid_argument("apply_rope: q and k must be equal-shape matrices");
  const std::size_t rows = q.rows(), width = q.cols();
  if (width % head_dim != 0) throw std::invalid_argument("apply_rope: width is not a multiple of the head dimension");
  if (positions.size() != rows) throw std::invalid_argument("apply_rope: one position per row required");

  RowMatrix cos_table(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  RowMatrix sin_table(cos_table.rows(), cos_table.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t pair = (c % head_dim) / 2;
      const double freq = std::pow(base, -2.0 * static_cast<double>(pair) / static_cast<double>(head_dim));
      const double angle = static_cast<double>(positions[r]) * freq;
      cos_table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::cos(angle);
      sin_table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::sin(angle);
    }
  }
  // x R swaps each pair as (x0, x1) -> (-x1, x0).
  RowMatrix rot = RowMatrix::Zero(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(width));
  for (Eigen::Index i = 0; i + 1 < rot.rows(); i += 2) {
    rot(i + 1, i) = -1.0;
    rot(i, i + 1) = 1.0;
  }
  const Tensor cos_t = Tensor::from_matrix(cos_table);
  const Tensor sin_t = Tensor::from_matrix(sin_table);
  const Tensor rot_t = Tensor::from_matrix(rot);
  auto rotate = [&](const Tensor& x) { return x * cos_t + matmul(x, rot_t) * sin_t; };
  return {rotate(q), rotate(k)};
}

Tensor lora_linear(const Tensor& x, const Tensor& w, const LoraPair* lora, double scale) {
  Tensor out = matmul(x, transpose(w));
  if (lora == nullptr) return out;
  if (lora->a.rank() != 2 || lora->b.rank() != 2 || lora->a.shape()[0] != lora->b.shape()[1] ||
      lora->a.shape()[1] != w.shape()[1] || lora->b.shape()[0] != w.shape()[0]) {
    throw std::invalid_argument("lora_linear: adapter rank or shape mismatch");
  }
  return out + matmul(matmul(x, transpose(lora->a)), transpose(lora->b)) * scale;
}

namespace {

const LoraPair* find_pair(const LoraAdapter* adapter, const std::string& name) {
  if (adapter == nullptr) return nullptr;
  auto it = adapter->matrices.find(name);
  if (it == adapter->matrices.end()) throw std::invalid_argument("adapter is missing matrix " + name);
  return &it->second;
}

}  // namespace

Tensor encoder_forward(const EncoderModel& model, const TokenBatch& tokens, TaskKind task, double rope_base) {
  const ModelConfig& cfg = model.config();
  if (tokens.len > cfg.max_seq_len) {
    throw std::invalid_argument("sequence length " + std::to_string(tokens.len) + " exceeds max_seq_len " +
                                std::to_string(cfg.max_seq_len));
  }
  if (tokens.ids.size() != tokens.batch * tokens.len || tokens.mask.size() != tokens.ids.size()) {
    throw std::invalid_argument("malformed token batch");
  }
  const LoraAdapter* adapter = task == TaskKind::None ? nullptr : &model.adapter(task);
  const double scale = cfg.lora_scale();
  const std::size_t d = cfg.d_model, hd = cfg.head_dim(), len = tokens.len;

  Tensor x = embedding(model.token_embedding(), tokens.ids);
  if (const LoraPair* emb = find_pair(adapter, "embedding/token")) {
    x = x + matmul(embedding(transpose(emb->a), tokens.ids), transpose(emb->b)) * scale;
  }

  std::vector<std::size_t> positions(tokens.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i % len;

  // Key-padding masks, one len x len matrix per sequence.
  std::vector<Mask> key_masks(tokens.batch, Mask(len * len, 0));
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) key_masks[b][i * len + j] = tokens.mask[b * len + j] ? 0 : 1;
    }
  }
  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const LayerWeights& w = model.layers()[l];
    const std::string p = "layer" + std::to_string(l) + "/";
    const Tensor h = layer_norm(x, w.ln1_gain, w.ln1_bias);
    Tensor q = lora_linear(h, w.wq, find_pair(adapter, p + "q"), scale);
    Tensor k = lora_linear(h, w.wk, find_pair(adapter, p + "k"), scale);
    const Tensor v = lora_linear(h, w.wv, find_pair(adapter, p + "v"), scale);
    auto rotated = apply_rope(q, k, positions, hd, rope_base);
    q = rotated.q;
    k = rotated.k;

    std::vector<Tensor> sequences;
    sequences.reserve(tokens.batch);
    for (std::size_t b = 0; b < tokens.batch; ++b) {
      std::vector<Tensor> heads;
      heads.reserve(cfg.n_heads);
      for (std::size_t head = 0; head < cfg.n_heads; ++head) {
        const Tensor qs = slice(q, b * len, len, head * hd, hd);
        const Tensor ks = slice(k, b * len, len, head * hd, hd);
        const Tensor vs = slice(v, b * len, len, head * hd, hd);
        const Tensor scores = masked_fill(matmul(qs, transpose(ks)) * inv_sqrt_hd, key_masks[b], -1e9);
        heads.push_back(matmul(softmax_rows(scores), vs));
      }
      sequences.push_back(heads.size() == 1 ? heads.front() : concat_cols(heads));
    }
    const Tensor attn = sequences.size() == 1 ? sequences.front() : concat_rows(sequences);
    x = x + lora_linear(attn, w.wo, find_pair(adapter, p + "o"), scale);

    const Tensor h2 = layer_norm(x, w.ln2_gain, w.ln2_bias);
    const Tensor ff = add_row(matmul(gelu(add_row(matmul(h2, transpose(w.w1)), w.b1)), transpose(w.w2)), w.b2);
    x = x + ff;
  }
  x = layer_norm(x, model.final_gain(), model.final_bias());
  return reshape(x, {tokens.batch, len, d});
}

Tensor mean_pool(const Tensor& states, const TokenBatch& tokens) {
  const std::size_t width = states.cols();
  if (states.numel() != tokens.batch * tokens.len * width) throw std::invalid_argument("mean_pool: shape mismatch");
  RowMatrix pool = RowMatrix::Zero(static_cast<Eigen::Index>(tokens.batch),
                                   static_cast<Eigen::Index>(tokens.batch * tokens.len));
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < tokens.len; ++j) count += tokens.mask[b * tokens.len + j] ? 1 : 0;
    if (count == 0) throw std::invalid_argument("mean_pool: row " + std::to_string(b) + " is fully masked");
    for (std::size_t j = 0; j < tokens.len; ++j) {
      if (tokens.mask[b * tokens.len + j]) {
        pool(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b * tokens.len + j)) = 1.0 / static_cast<double>(count);
      }
    }
  }
  const Tensor flat = states.rank() == 2 ? states : reshape(states, {tokens.batch * tokens.len, width});
  return matmul(Tensor::from_matrix(pool), flat);
}

Tensor truncate_embeddings(const Tensor& embeddings, std::size_t dim) {
  if (dim == 0 || dim > embeddings.cols()) throw std::invalid_argument("truncation dimension out of range");
  const Tensor head = dim == embeddings.cols() ? embeddings : slice_cols(embeddings, 0, dim);
  return l2_normalize_rows(head);
}

std::string with_instruction(std::string_view text, InstructionRole role) {
  switch (role) {
    case InstructionRole::Query: return "query: " + std::string(text);
    case InstructionRole::Passage: return "passage: " + std::string(text);
    case InstructionRole::None: break;
  }
  return std::string(text);
}

Tensor encode_texts(const EncoderModel& model, std::span<const std::string> texts, TaskKind task, double rope_base) {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(texts.size());
  for (const auto& t : texts) seqs.push_back(tokenize(t, model.vocab(), model.config().max_seq_len));
  const TokenBatch tokens = TokenBatch::pad(seqs);
  return mean_pool(encoder_forward(model, tokens, task, rope_base), tokens);
}

Tensor embed(const EncoderModel& model, std::span<const std::string> texts, TaskKind task, std::size_t target_dim,
             std::optional<double> rope_base) {
  const auto& dims = model.config().mrl_dims;
  if (std::find(dims.begin(), dims.end(), target_dim) == dims.end()) {
    throw std::invalid_argument("target dimension " + std::to_string(target_dim) + " is not one of the MRL dims");
  }
  NoGradGuard no_grad;
  const Tensor pooled = encode_texts(model, texts, task, rope_base.value_or(model.config().rope_base_infer));
  return truncate_embeddings(pooled, target_dim);
}

double ParameterCounts::adapter_percent(TaskKind task) const {
  auto it = adapters.find(task);
  if (it == adapters.end() || base == 0) return 0.0;
  return 100.0 * static_cast<double>(it->second) / static_cast<double>(base);
}

ParameterCounts count_parameters(const EncoderModel& model) {
  ParameterCounts c;
  for (const auto& t : model.base_parameters()) c.base += t.numel();
  for (const auto& [task, adapter] : model.adapters()) c.adapters[task] = adapter.parameter_count();
  return c;
}

std::size_t lora_parameter_formula(const ModelConfig& config) {
  const std::size_t r = config.lora_rank, d = config.d_model;
  return r * (config.vocab_size + d) + config.n_layers * 4 * r * (d + d);
}

}  // namespace taskemb
