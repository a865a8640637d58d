#include "taskemb/trainer.hpp"

#include "taskemb/data.hpp"
#include "taskemb/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <optional>
#include <stdexcept>

namespace taskemb {

void StagePlan::validate() const {
  if (stage < 1 || stage > 3) throw std::invalid_argument("stage must be 1, 2 or 3");
  if (phases.empty()) throw std::invalid_argument("a stage needs at least one phase");
  if (stage < 3 && phases.size() > 2) throw std::invalid_argument("stages I and II take one or two phases");
  if (stage == 3 && phases.size() != 1) throw std::invalid_argument("stage III takes exactly one phase");
  if (stage == 3 && task == TaskKind::None) throw std::invalid_argument("stage III needs a task");
  if (stage < 3 && task != TaskKind::None) throw std::invalid_argument("only stage III takes a task");
  for (const auto& p : phases) {
    if (p.batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");
    if (p.seq_len == 0) throw std::invalid_argument("seq_len must be positive");
    if (p.max_lr < 0.0) throw std::invalid_argument("max_lr must be non-negative");
    if (!(p.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
    if (p.steps > 0 && p.warmup_steps > p.steps) throw std::invalid_argument("warmup_steps exceeds steps");
  }
  if (phases.size() == 2 && phases[1].seq_len < phases[0].seq_len) {
    throw std::invalid_argument("the second phase must not use shorter sequences than the first");
  }
  if (!mrl_weights.empty() && mrl_weights.size() != mrl_dims.size()) {
    throw std::invalid_argument("mrl_weights must match mrl_dims");
  }
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw std::invalid_argument("mask_ratio must lie in (0, 1)");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
}

std::uint64_t hash_parameters(const std::vector<std::pair<std::string, Tensor>>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : params) {
    const auto values = t.data();
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    for (std::size_t i = 0; i < values.size() * sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Tensor encode_for_training(const EncoderModel& model, std::span<const std::string> texts, TaskKind task,
                           std::size_t seq_len) {
  const std::size_t cap = std::min(seq_len, model.config().max_seq_len);
  std::vector<std::vector<int>> seqs;
  seqs.reserve(texts.size());
  for (const auto& t : texts) {
    auto ids = tokenize(t, model.vocab(), cap);
    if (ids.empty()) throw std::invalid_argument("cannot encode an empty text");
    seqs.push_back(std::move(ids));
  }
  const TokenBatch tokens = TokenBatch::pad(seqs);
  return mean_pool(encoder_forward(model, tokens, task, model.config().rope_base_train), tokens);
}

namespace {

struct StepResult {
  std::string dataset;
  Tensor loss;  ///< undefined: nothing to learn from this batch
};

std::size_t warmup_for(const PhasePlan& p) {
  return p.warmup_steps > 0 ? p.warmup_steps : std::max<std::size_t>(1, p.steps / 10);
}

/// Shared optimisation loop. `make_loss` builds the graph for step s;
/// `after_backward` checks which parameters received gradients.
template <typename MakeLoss, typename Check>
void run_phase(AdamW& optimizer, const PhasePlan& phase, std::size_t phase_index, TrainLog& log, MakeLoss&& make_loss,
               Check&& after_backward) {
  if (phase.steps == 0) return;
  const std::size_t warmup = warmup_for(phase);
  for (std::size_t s = 1; s <= phase.steps; ++s) {
    // Evaluated one step past the end so the last update still has a non-zero rate.
    const double lr = lr_schedule(s, warmup, phase.steps + 1, phase.max_lr);
    optimizer.zero_grad();
    StepResult r = make_loss(s);
    if (!r.loss.defined()) {
      ++log.skipped_batches;
      continue;
    }
    const double value = r.loss.item();
    if (!std::isfinite(value) || value > kDivergenceThreshold) {
      throw NumericError("loss diverged at phase " + std::to_string(phase_index) + " step " + std::to_string(s) +
                         " (dataset " + r.dataset + "): " + std::to_string(value));
    }
    backward(r.loss);
    after_backward();
    optimizer.step(lr);
    log.steps.push_back({phase_index, s, std::move(r.dataset), value, lr});
  }
}

void require_no_adapter_grads(const EncoderModel& model) {
  for (const auto& [name, t] : model.named_adapter_parameters()) {
    if (!t.grad().empty()) throw std::logic_error("adapter parameter " + name + " received a gradient");
  }
}

std::vector<double> mrl_weights_of(const StagePlan& plan) {
  if (!plan.mrl_weights.empty()) return plan.mrl_weights;
  return std::vector<double>(plan.mrl_dims.size(), 1.0);
}

/// Applies the Matryoshka wrapper when the plan lists dims.
Tensor embedding_loss(const EmbeddingLoss& fn, std::vector<Tensor> embeddings, const StagePlan& plan,
                      const EncoderModel& model) {
  if (plan.mrl_dims.empty()) return fn(embeddings);
  const auto weights = mrl_weights_of(plan);
  return mrl_loss(fn, embeddings, plan.mrl_dims, weights, model.config().mrl_dims);
}

std::size_t token_count(const std::string& text, const EncoderModel& model) {
  return tokenize(text, model.vocab()).size();
}

template <typename Record>
std::map<std::string, std::vector<Record>> keep_full_datasets(std::map<std::string, std::vector<Record>> groups,
                                                               std::size_t batch_size, const char* what) {
  for (auto it = groups.begin(); it != groups.end();) {
    it = it->second.size() < batch_size ? groups.erase(it) : std::next(it);
  }
  if (groups.empty()) {
    throw std::invalid_argument(std::string("no ") + what + " dataset holds a full batch of " +
                                std::to_string(batch_size) + " records");
  }
  return groups;
}


}  // namespace

TrainLog run_stage1(EncoderModel& model, std::span<const std::string> corpus, const StagePlan& plan) {
  plan.validate();
  if (plan.stage != 1) throw std::invalid_argument("run_stage1 needs a stage-1 plan");
  TrainLog log;
  std::vector<std::pair<std::string, Tensor>> params = model.named_base_parameters();
  model.set_base_trainable(true);
  AdamW optimizer(params, {0.9, 0.999, 1e-8, plan.weight_decay});
  Rng root(plan.seed);
  const Vocab& vocab = model.vocab();

  for (std::size_t ph = 0; ph < plan.phases.size(); ++ph) {
    const PhasePlan& phase = plan.phases[ph];
    if (phase.steps == 0) continue;
    const std::size_t cap = std::min(phase.seq_len, model.config().max_seq_len);
    std::vector<std::vector<int>> sequences;
    for (const auto& text : corpus) {
      auto ids = tokenize(text, vocab);
      if (ids.empty() || ids.size() < phase.min_tokens) continue;
      if (ids.size() > cap) ids.resize(cap);
      sequences.push_back(std::move(ids));
    }
    std::map<std::string, std::vector<std::vector<int>>> groups{{"corpus", std::move(sequences)}};
    groups = keep_full_datasets(std::move(groups), phase.batch_size, "pre-training");
    Rng phase_rng = root.fork(ph);
    BatchSampler<std::vector<int>> sampler(groups, phase.batch_size, phase_rng.fork(0));
    Rng mask_rng = phase_rng.fork(1);

    run_phase(
        optimizer, phase, ph, log,
        [&](std::size_t) {
          const auto batch = sampler.next();
          std::vector<std::vector<int>> corrupted;
          std::vector<int> positions, targets;
          std::size_t len = 0;
          for (const auto& ids : batch.records) len = std::max(len, ids.size());
          for (std::size_t b = 0; b < batch.records.size(); ++b) {
            MaskedSequence m = whole_word_mask(batch.records[b], plan.mask_ratio, vocab, mask_rng);
            for (std::size_t i = 0; i < m.positions.size(); ++i) {
              positions.push_back(static_cast<int>(b * len + m.positions[i]));
              targets.push_back(m.targets[i]);
            }
            corrupted.push_back(std::move(m.corrupted));
          }
          if (positions.empty()) {
            // Every batch must teach something: force one masked token.
            const std::size_t b = mask_rng.index(batch.records.size());
            const std::size_t p = mask_rng.index(batch.records[b].size());
            targets.push_back(batch.records[b][p]);
            positions.push_back(static_cast<int>(b * len + p));
            corrupted[b][p] = Vocab::kMask;
          }
          const TokenBatch tokens = TokenBatch::pad(corrupted, len);
          const Tensor states = encoder_forward(model, tokens, TaskKind::None, model.config().rope_base_train);
          const Tensor flat = reshape(states, {tokens.batch * tokens.len, model.config().d_model});
          const Tensor hidden = embedding(flat, positions);
          const Tensor logits = add_row(matmul(hidden, transpose(model.token_embedding())), model.mlm_bias());
          std::vector<std::size_t> rows(targets.size());
          for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
          return StepResult{batch.dataset, mlm_loss(logits, targets, rows)};
        },
        [&] { require_no_adapter_grads(model); });
    log.reshuffles += sampler.reshuffles();
  }
  model.stage_completed = std::max(model.stage_completed, 1);
  return log;
}

TrainLog run_stage2(EncoderModel& model, const std::vector<PairRecord>& pairs, const StagePlan& plan) {
  plan.validate();
  if (plan.stage != 2) throw std::invalid_argument("run_stage2 needs a stage-2 plan");
  TrainLog log;
  model.set_base_trainable(true);
  AdamW optimizer(model.named_base_parameters(), {0.9, 0.999, 1e-8, plan.weight_decay});
  Rng root(plan.seed);

  for (std::size_t ph = 0; ph < plan.phases.size(); ++ph) {
    const PhasePlan& phase = plan.phases[ph];
    if (phase.steps == 0) continue;
    std::vector<PairRecord> eligible;
    for (const auto& p : pairs) {
      if (phase.min_tokens == 0 || token_count(p.p, model) >= phase.min_tokens) eligible.push_back(p);
    }
    auto groups = keep_full_datasets(group_by_dataset(eligible), phase.batch_size, "pair");
    Rng phase_rng = root.fork(ph);
    BatchSampler<PairRecord> sampler(groups, phase.batch_size, phase_rng.fork(0));
    const double tau = phase.temperature;
    const EmbeddingLoss fn = [tau](std::span<const Tensor> e) { return pair_loss_bidirectional(e[0], e[1], tau); };

    run_phase(
        optimizer, phase, ph, log,
        [&](std::size_t) {
          const auto batch = sampler.next();
          std::vector<std::string> qs, ps;
          for (const auto& r : batch.records) {
            qs.push_back(r.q);
            ps.push_back(r.p);
          }
          const Tensor q = encode_for_training(model, qs, TaskKind::None, phase.seq_len);
          const Tensor p = encode_for_training(model, ps, TaskKind::None, phase.seq_len);
          return StepResult{batch.dataset, embedding_loss(fn, {q, p}, plan, model)};
        },
        [&] { require_no_adapter_grads(model); });
    log.reshuffles += sampler.reshuffles();
  }
  model.stage_completed = std::max(model.stage_completed, 2);
  return log;
}

namespace {

/// Restores base trainability however stage III exits.
class FrozenBase {
public:
  explicit FrozenBase(EncoderModel& model) : model_(model) { model_.set_base_trainable(false); }
  ~FrozenBase() { model_.set_base_trainable(true); }
  FrozenBase(const FrozenBase&) = delete;
  FrozenBase& operator=(const FrozenBase&) = delete;

private:
  EncoderModel& model_;
};

std::vector<std::pair<std::string, Tensor>> adapter_params(const EncoderModel& model, std::span<const TaskKind> tasks) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, t] : model.named_adapter_parameters()) {
    for (TaskKind task : tasks) {
      if (name.rfind("adapter/" + to_string(task) + "/", 0) == 0) out.emplace_back(name, t);
    }
  }
  return out;
}

Tensor row_cosines(const Tensor& a, const Tensor& b) {
  return sum(l2_normalize_rows(a) * l2_normalize_rows(b), 1);
}

/// Negatives per tuple in a batch: the smallest count present.
std::size_t common_negatives(const std::vector<TupleRecord>& batch) {
  std::size_t m = batch.front().negatives.size();
  for (const auto& t : batch) m = std::min(m, t.negatives.size());
  return m;
}

}  // namespace

TrainLog run_stage3(EncoderModel& model, const AdapterData& data, const StagePlan& plan) {
  plan.validate();
  if (plan.stage != 3) throw std::invalid_argument("run_stage3 needs a stage-3 plan");
  if (model.stage_completed < 2) {
    throw std::invalid_argument("stage III needs a model that completed stage II (stage_completed = " +
                                std::to_string(model.stage_completed) + ")");
  }
  const bool retrieval = plan.task == TaskKind::RetrievalQuery || plan.task == TaskKind::RetrievalPassage;
  std::vector<TaskKind> tasks;
  if (retrieval) {
    tasks.push_back(TaskKind::RetrievalQuery);
    if (plan.two_retrieval_adapters) tasks.push_back(TaskKind::RetrievalPassage);
  } else {
    tasks.push_back(plan.task);
  }
  for (TaskKind t : tasks) {
    if (!model.has_adapter(t)) model.add_adapter(t);
  }

  const PhasePlan& phase = plan.phases.front();
  TrainLog log;
  const auto base_before = hash_parameters(model.named_base_parameters());
  {
    FrozenBase frozen(model);
    AdamW optimizer(adapter_params(model, tasks), {0.9, 0.999, 1e-8, plan.weight_decay});
    Rng root(plan.seed);
    const double tau = phase.temperature;
    const std::size_t bs = phase.batch_size;
    const std::size_t seq_len = phase.seq_len;
    auto after_backward = [&] {
      for (const auto& [name, t] : model.named_base_parameters()) {
        if (!t.grad().empty()) throw std::logic_error("frozen base parameter " + name + " received a gradient");
      }
    };

    std::function<StepResult(std::size_t)> make_loss;
    std::optional<BatchSampler<TupleRecord>> tuple_sampler;
    std::optional<BatchSampler<ScoredPairRecord>> scored_sampler;
    std::optional<BatchSampler<PairRecord>> pair_sampler;
    std::optional<BatchSampler<LabeledRecord>> labeled_sampler;
    Rng pick_rng = root.fork(7);

    auto pair_step = [&](TaskKind task) {
      const auto batch = pair_sampler->next();
      std::vector<std::string> qs, ps;
      for (const auto& r : batch.records) {
        qs.push_back(r.q);
        ps.push_back(r.p);
      }
      const Tensor q = encode_for_training(model, qs, task, seq_len);
      const Tensor p = encode_for_training(model, ps, task, seq_len);
      const EmbeddingLoss fn = [tau](std::span<const Tensor> e) { return pair_loss_bidirectional(e[0], e[1], tau); };
      return StepResult{batch.dataset, embedding_loss(fn, {q, p}, plan, model)};
    };

    switch (plan.task) {
      case TaskKind::Classification:
      case TaskKind::RetrievalQuery:
      case TaskKind::RetrievalPassage: {
        if (plan.task == TaskKind::Classification && bs > Vocab::kTupleIdTokens) {
          throw std::invalid_argument("classification batches are limited to " + std::to_string(Vocab::kTupleIdTokens) +
                                      " tuples");
        }
        tuple_sampler.emplace(keep_full_datasets(group_by_dataset(data.tuples), bs, "tuple"), bs, root.fork(0));
        const TaskKind q_task = retrieval ? TaskKind::RetrievalQuery : plan.task;
        const TaskKind p_task = retrieval ? tasks.back() : plan.task;
        const bool prefixes = retrieval && plan.instructions;
        make_loss = [&, q_task, p_task, prefixes](std::size_t) {
          auto batch = tuple_sampler->next();
          if (!retrieval) {
            for (std::size_t i = 0; i < batch.records.size(); ++i) {
              batch.records[i] = append_unique_id(std::move(batch.records[i]), Vocab::tuple_id_token(i));
            }
          }
          const std::size_t m = common_negatives(batch.records);
          std::vector<std::string> qs, ps;
          for (const auto& t : batch.records) {
            qs.push_back(prefixes ? with_instruction(t.q, InstructionRole::Query) : t.q);
            ps.push_back(prefixes ? with_instruction(t.p, InstructionRole::Passage) : t.p);
          }
          for (const auto& t : batch.records) {
            for (std::size_t j = 0; j < m; ++j) {
              ps.push_back(prefixes ? with_instruction(t.negatives[j], InstructionRole::Passage) : t.negatives[j]);
            }
          }
          const std::size_t k = batch.records.size();
          const Tensor q = encode_for_training(model, qs, q_task, seq_len);
          const Tensor docs = encode_for_training(model, ps, p_task, seq_len);
          const std::size_t d = docs.cols();
          std::vector<Tensor> embs{q, slice(docs, 0, k, 0, d)};
          if (m > 0) embs.push_back(slice(docs, k, k * m, 0, d));
          const EmbeddingLoss fn = [tau, m](std::span<const Tensor> e) {
            return triplet_loss(e[0], e[1], m > 0 ? e[2] : Tensor(), m, tau);
          };
          return StepResult{batch.dataset, embedding_loss(fn, std::move(embs), plan, model)};
        };
        break;
      }
      case TaskKind::TextMatching: {
        std::size_t scored_total = 0, pair_total = 0;
        if (!data.scored.empty()) {
          auto groups = keep_full_datasets(group_by_dataset(data.scored), bs, "scored");
          for (const auto& [n, r] : groups) scored_total += r.size();
          scored_sampler.emplace(std::move(groups), bs, root.fork(1));
        }
        if (!data.pairs.empty()) {
          auto groups = keep_full_datasets(group_by_dataset(data.pairs), bs, "pair");
          for (const auto& [n, r] : groups) pair_total += r.size();
          pair_sampler.emplace(std::move(groups), bs, root.fork(2));
        }
        if (scored_total + pair_total == 0) throw std::invalid_argument("text-matching training needs scored or pair data");
        make_loss = [&, scored_total, pair_total](std::size_t) {
          if (pick_rng.index(scored_total + pair_total) >= scored_total) return pair_step(TaskKind::TextMatching);
          const auto batch = scored_sampler->next();
          std::vector<std::string> qs, ps;
          std::vector<double> zeta;
          for (const auto& r : batch.records) {
            qs.push_back(r.q);
            ps.push_back(r.p);
            zeta.push_back(r.zeta());
          }
          const Tensor q = encode_for_training(model, qs, TaskKind::TextMatching, seq_len);
          const Tensor p = encode_for_training(model, ps, TaskKind::TextMatching, seq_len);
          const EmbeddingLoss fn = [tau, zeta](std::span<const Tensor> e) {
            return cosent_loss(row_cosines(e[0], e[1]), zeta, tau);
          };
          return StepResult{batch.dataset, embedding_loss(fn, {q, p}, plan, model)};
        };
        break;
      }
      case TaskKind::Separation: {
        labeled_sampler.emplace(keep_full_datasets(group_by_dataset(data.labeled), bs, "labeled"), bs, root.fork(3));
        if (!data.pairs.empty()) {
          pair_sampler.emplace(keep_full_datasets(group_by_dataset(data.pairs), bs, "pair"), bs, root.fork(2));
        }
        make_loss = [&](std::size_t s) {
          if (pair_sampler && s % 2 == 0) return pair_step(TaskKind::Separation);
          const auto batch = labeled_sampler->next();
          std::vector<std::string> texts, labels;
          for (const auto& r : batch.records) {
            texts.push_back(r.text);
            labels.push_back(r.label);
          }
          const Tensor e = encode_for_training(model, texts, TaskKind::Separation, seq_len);
          bool degenerate = false;
          const EmbeddingLoss fn = [tau, &labels, &degenerate](std::span<const Tensor> x) {
            SeparationLoss l = separation_loss(x[0], labels, tau);
            degenerate = l.degenerate;
            return l.loss;
          };
          Tensor loss = embedding_loss(fn, {e}, plan, model);
          return StepResult{batch.dataset, degenerate ? Tensor() : loss};
        };
        break;
      }
      case TaskKind::None: break;
    }

    run_phase(optimizer, phase, 0, log, make_loss, after_backward);
    if (tuple_sampler) log.reshuffles += tuple_sampler->reshuffles();
    if (scored_sampler) log.reshuffles += scored_sampler->reshuffles();
    if (pair_sampler) log.reshuffles += pair_sampler->reshuffles();
    if (labeled_sampler) log.reshuffles += labeled_sampler->reshuffles();
  }
  if (hash_parameters(model.named_base_parameters()) != base_before) {
    throw std::logic_error("base weights changed during adapter training");
  }
  model.stage_completed = std::max(model.stage_completed, 3);
  return log;
}

double masked_token_accuracy(const EncoderModel& model, std::span<const std::string> texts, double ratio, Rng& rng) {
  NoGradGuard no_grad;
  std::size_t hits = 0, total = 0;
  for (const auto& text : texts) {
    const auto ids = tokenize(text, model.vocab(), model.config().max_seq_len);
    if (ids.empty()) continue;
    MaskedSequence m = whole_word_mask(ids, ratio, model.vocab(), rng);
    if (m.positions.empty()) continue;
    const TokenBatch tokens = TokenBatch::pad({m.corrupted});
    const Tensor states = encoder_forward(model, tokens, TaskKind::None, model.config().rope_base_train);
    const Tensor flat = reshape(states, {tokens.len, model.config().d_model});
    std::vector<int> rows(m.positions.begin(), m.positions.end());
    const Tensor logits =
        add_row(matmul(embedding(flat, rows), transpose(model.token_embedding())), model.mlm_bias());
    const auto lm = logits.matrix();
    for (std::size_t i = 0; i < m.positions.size(); ++i) {
      Eigen::Index best = 0;
      lm.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      hits += static_cast<int>(best) == m.targets[i] ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("masked_token_accuracy: no position was masked");
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace taskemb
