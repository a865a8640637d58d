#include "taskemb/pipeline.hpp"

#include "taskemb/bm25.hpp"
#include "taskemb/checkpoint.hpp"
#include "taskemb/data.hpp"
#include "taskemb/failure_cases.hpp"
#include "taskemb/objectives.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>
#include <stdexcept>

namespace taskemb {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw std::invalid_argument("unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
void take(const json& j, const char* key, T& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(field);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

double default_temperature(int stage, TaskKind task, std::size_t phase) {
  if (stage == 2) return phase == 0 ? temperature::kPairShort : temperature::kPairLong;
  switch (task) {
    case TaskKind::Classification: return temperature::kClassification;
    case TaskKind::Separation: return temperature::kSeparation;
    case TaskKind::TextMatching: return temperature::kTextMatching;
    case TaskKind::RetrievalQuery:
    case TaskKind::RetrievalPassage: return temperature::kRetrieval;
    case TaskKind::None: break;
  }
  return temperature::kPairShort;
}

std::uint64_t stage_seed(std::uint64_t seed, int stage, TaskKind task) {
  return Rng::mix(seed ^ (static_cast<std::uint64_t>(stage) << 8) ^ static_cast<std::uint64_t>(task));
}

PhasePlan phase(std::size_t steps, std::size_t batch, std::size_t seq_len, double lr, double tau,
                std::size_t min_tokens = 0) {
  PhasePlan p;
  p.steps = steps;
  p.batch_size = batch;
  p.seq_len = seq_len;
  p.max_lr = lr;
  p.temperature = tau;
  p.min_tokens = min_tokens;
  return p;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

StagePlan stage_plan_from_json(const json& j, std::uint64_t default_seed) {
  check_keys(j,
             {"stage", "task", "phases", "mrl_dims", "mrl_weights", "weight_decay", "mask_ratio", "seed",
              "two_retrieval_adapters", "instructions"},
             "stage plan");
  StagePlan plan;
  if (!j.contains("stage")) throw std::invalid_argument("stage plan needs \"stage\"");
  take(j, "stage", plan.stage);
  if (auto it = j.find("task"); it != j.end()) plan.task = parse_task(it->get<std::string>());
  plan.seed = stage_seed(default_seed, plan.stage, plan.task);
  take(j, "seed", plan.seed);
  take(j, "mrl_dims", plan.mrl_dims);
  take(j, "mrl_weights", plan.mrl_weights);
  take(j, "weight_decay", plan.weight_decay);
  take(j, "mask_ratio", plan.mask_ratio);
  take(j, "two_retrieval_adapters", plan.two_retrieval_adapters);
  take(j, "instructions", plan.instructions);
  const json phases = j.value("phases", json::array());
  if (!phases.is_array()) throw std::invalid_argument("\"phases\" must be an array");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const json& p = phases[i];
    check_keys(p, {"steps", "batch_size", "seq_len", "warmup_steps", "max_lr", "temperature", "min_tokens"},
               "phase plan");
    PhasePlan ph;
    ph.temperature = default_temperature(plan.stage, plan.task, i);
    take(p, "steps", ph.steps);
    take(p, "batch_size", ph.batch_size);
    take(p, "seq_len", ph.seq_len);
    take(p, "warmup_steps", ph.warmup_steps);
    take(p, "max_lr", ph.max_lr);
    take(p, "temperature", ph.temperature);
    take(p, "min_tokens", ph.min_tokens);
    plan.phases.push_back(ph);
  }
  plan.validate();
  return plan;
}

json stage_plan_to_json(const StagePlan& plan) {
  json phases = json::array();
  for (const auto& p : plan.phases) {
    phases.push_back({{"steps", p.steps},
                      {"batch_size", p.batch_size},
                      {"seq_len", p.seq_len},
                      {"warmup_steps", p.warmup_steps},
                      {"max_lr", p.max_lr},
                      {"temperature", p.temperature},
                      {"min_tokens", p.min_tokens}});
  }
  return json{{"stage", plan.stage},
              {"task", to_string(plan.task)},
              {"phases", std::move(phases)},
              {"mrl_dims", plan.mrl_dims},
              {"mrl_weights", plan.mrl_weights},
              {"weight_decay", plan.weight_decay},
              {"mask_ratio", plan.mask_ratio},
              {"seed", plan.seed},
              {"two_retrieval_adapters", plan.two_retrieval_adapters},
              {"instructions", plan.instructions}};
}

std::vector<StagePlan> RunConfig::default_stages(std::uint64_t seed) {
  const std::vector<std::size_t> mrl{4, 8, 16, 32};
  std::vector<StagePlan> out;
  StagePlan s1;
  s1.stage = 1;
  s1.phases = {phase(60, 16, 8, 1e-3, 0.05), phase(20, 8, 32, 1e-3, 0.05, 9)};
  s1.seed = stage_seed(seed, 1, TaskKind::None);
  out.push_back(s1);

  StagePlan s2;
  s2.stage = 2;
  s2.phases = {phase(600, 16, 16, 3e-3, temperature::kPairShort), phase(100, 8, 32, 1e-3, temperature::kPairLong, 8)};
  s2.mrl_dims = mrl;
  s2.seed = stage_seed(seed, 2, TaskKind::None);
  out.push_back(s2);

  for (TaskKind task : {TaskKind::RetrievalQuery, TaskKind::TextMatching, TaskKind::Classification, TaskKind::Separation}) {
    StagePlan s3;
    s3.stage = 3;
    s3.task = task;
    const bool tuples = task == TaskKind::RetrievalQuery || task == TaskKind::Classification;
    s3.phases = {phase(tuples ? 150 : 200, tuples ? 8 : 16, 32, 3e-3, default_temperature(3, task, 0))};
    s3.mrl_dims = mrl;
    s3.seed = stage_seed(seed, 3, task);
    out.push_back(s3);
  }
  return out;
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"seed", "output_dir", "model", "max_vocab_words", "data", "hard_negatives", "stages", "eval"},
             "run config");
  RunConfig c;
  if (!j.contains("seed")) throw std::invalid_argument("run config needs an explicit \"seed\"");
  take(j, "seed", c.seed);
  std::string out_dir;
  take(j, "output_dir", out_dir);
  c.output_dir = resolve(base_dir, out_dir);
  c.model.seed = c.seed;
  if (auto it = j.find("model"); it != j.end()) {
    if (it->contains("vocab_size")) {
      throw std::invalid_argument("model.vocab_size is derived from the data; set max_vocab_words instead");
    }
    json m = *it;
    if (!m.contains("seed")) m["seed"] = c.seed;
    c.model = config_from_json(m);
  }
  take(j, "max_vocab_words", c.max_vocab_words);
  take(j, "hard_negatives", c.hard_negatives);

  const json data = j.value("data", json{{"toy", json::object()}});
  check_keys(data,
             {"toy", "corpus", "pairs", "labeled", "labeled_eval", "scored", "scored_eval", "threads", "eval_queries",
              "eval_corpus", "eval_qrels"},
             "data");
  if (auto it = data.find("toy"); it != data.end()) {
    check_keys(*it,
               {"corpus", "pairs", "eval_docs_per_topic", "eval_queries_per_topic", "labeled_per_topic", "scored",
                "threads", "failures_per_case"},
               "data.toy");
    ToyDataSpec t;
    take(*it, "corpus", t.corpus);
    take(*it, "pairs", t.pairs);
    take(*it, "eval_docs_per_topic", t.eval_docs_per_topic);
    take(*it, "eval_queries_per_topic", t.eval_queries_per_topic);
    take(*it, "labeled_per_topic", t.labeled_per_topic);
    take(*it, "scored", t.scored);
    take(*it, "threads", t.threads);
    take(*it, "failures_per_case", t.failures_per_case);
    c.data.toy = t;
  }
  auto path_of = [&](const char* key) { return resolve(base_dir, data.value(key, std::string())); };
  c.data.corpus = path_of("corpus");
  c.data.pairs = path_of("pairs");
  c.data.labeled = path_of("labeled");
  c.data.labeled_eval = path_of("labeled_eval");
  c.data.scored = path_of("scored");
  c.data.scored_eval = path_of("scored_eval");
  c.data.threads = path_of("threads");
  c.data.eval_queries = path_of("eval_queries");
  c.data.eval_corpus = path_of("eval_corpus");
  c.data.eval_qrels = path_of("eval_qrels");

  if (auto it = j.find("stages"); it != j.end()) {
    if (!it->is_array()) throw std::invalid_argument("\"stages\" must be an array");
    for (const auto& s : *it) c.stages.push_back(stage_plan_from_json(s, c.seed));
  } else {
    c.stages = default_stages(c.seed);
  }
  if (auto it = j.find("eval"); it != j.end()) {
    check_keys(*it, {"dim", "sweep_dims", "instructions", "failures", "ablation"}, "eval");
    take(*it, "dim", c.eval.dim);
    take(*it, "sweep_dims", c.eval.sweep_dims);
    take(*it, "instructions", c.eval.instructions);
    take(*it, "failures", c.eval.failures);
    take(*it, "ablation", c.eval.ablation);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void RunConfig::validate() const {
  model.validate();
  if (max_vocab_words == 0) throw std::invalid_argument("max_vocab_words must be positive");
  if (hard_negatives == 0) throw std::invalid_argument("hard_negatives must be positive");
  const auto& dims = model.mrl_dims;
  auto is_mrl = [&](std::size_t d) { return std::find(dims.begin(), dims.end(), d) != dims.end(); };
  if (!is_mrl(eval.dim)) throw std::invalid_argument("eval.dim must be one of the model's mrl_dims");
  for (auto d : eval.sweep_dims) {
    if (!is_mrl(d)) throw std::invalid_argument("eval.sweep_dims must be a subset of the model's mrl_dims");
  }
  for (const auto& s : stages) {
    s.validate();
    for (auto d : s.mrl_dims) {
      if (!is_mrl(d)) throw std::invalid_argument("stage mrl_dims must be a subset of the model's mrl_dims");
    }
  }
  const bool files = !data.corpus.empty() || !data.pairs.empty();
  if (!data.toy && !files) throw std::invalid_argument("data needs either \"toy\" or file paths");
  if (data.toy && files) throw std::invalid_argument("data takes either \"toy\" or file paths, not both");
  for (const auto* p : {&data.corpus, &data.pairs, &data.labeled, &data.labeled_eval, &data.scored, &data.scored_eval,
                        &data.threads, &data.eval_queries, &data.eval_corpus, &data.eval_qrels}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw DataError("data file not found: " + p->string());
  }
  if (!data.toy) {
    if (data.eval_queries.empty() != data.eval_corpus.empty() || data.eval_corpus.empty() != data.eval_qrels.empty()) {
      throw std::invalid_argument("eval_queries, eval_corpus and eval_qrels go together");
    }
  }
}

const StagePlan* RunConfig::find_stage(int stage, TaskKind task) const {
  auto same = [](TaskKind a, TaskKind b) {
    auto retrieval = [](TaskKind t) { return t == TaskKind::RetrievalQuery || t == TaskKind::RetrievalPassage; };
    return a == b || (retrieval(a) && retrieval(b));
  };
  for (const auto& s : stages) {
    if (s.stage == stage && same(s.task, task)) return &s;
  }
  return nullptr;
}

std::vector<std::string> PreparedData::vocabulary_texts() const {
  std::vector<std::string> out = corpus;
  for (const auto& p : pairs) {
    out.push_back(p.q);
    out.push_back(p.p);
  }
  for (const auto* tuples : {&retrieval_tuples, &class_tuples}) {
    for (const auto& t : *tuples) {
      out.push_back(t.q);
      out.push_back(t.p);
      out.insert(out.end(), t.negatives.begin(), t.negatives.end());
    }
  }
  for (const auto& l : labeled) out.push_back(l.text);
  for (const auto& s : scored) {
    out.push_back(s.q);
    out.push_back(s.p);
  }
  return out;
}

AdapterData PreparedData::adapter_data(TaskKind task) const {
  AdapterData d;
  switch (task) {
    case TaskKind::Classification: d.tuples = class_tuples; break;
    case TaskKind::RetrievalQuery:
    case TaskKind::RetrievalPassage: d.tuples = retrieval_tuples; break;
    case TaskKind::TextMatching:
      d.scored = scored;
      d.pairs = pairs;
      break;
    case TaskKind::Separation:
      d.labeled = labeled;
      d.pairs = pairs;
      break;
    case TaskKind::None: break;
  }
  return d;
}

ToyData make_toy_data(const ToyDataSpec& t, Rng& rng) {
  const ToyWorld world;
  ToyData d;
  d.corpus = world.pretraining_corpus(t.corpus, rng);
  d.pairs = world.pairs(t.pairs, rng, "toy-pairs");
  d.eval_set = world.retrieval_set(t.eval_docs_per_topic, t.eval_queries_per_topic, rng);
  d.labeled = world.labeled(t.labeled_per_topic, rng, "toy-topics");
  d.labeled_eval = world.labeled(std::max<std::size_t>(2, t.labeled_per_topic / 2), rng, "toy-topics");
  d.scored = world.scored(t.scored, rng, "toy-sts");
  d.scored_eval = world.scored(std::max<std::size_t>(8, t.scored / 4), rng, "toy-sts");
  d.threads = world.threads(t.threads, rng);
  return d;
}

PreparedData prepare_data(const RunConfig& config, const std::filesystem::path& out_dir) {
  PreparedData d;
  Rng root(config.seed);
  Rng gen = root.fork(1);
  Rng mining = root.fork(2);
  Rng tuples_rng = root.fork(3);
  Rng quality_rng = root.fork(4);
  Rng failure_rng = root.fork(5);

  std::vector<PairRecord> raw_pairs;
  std::vector<QualityThread> threads;
  if (config.data.toy) {
    ToyData toy = make_toy_data(*config.data.toy, gen);
    d.corpus = std::move(toy.corpus);
    raw_pairs = std::move(toy.pairs);
    d.eval_set = std::move(toy.eval_set);
    d.labeled = std::move(toy.labeled);
    d.labeled_eval = std::move(toy.labeled_eval);
    d.scored = std::move(toy.scored);
    d.scored_eval = std::move(toy.scored_eval);
    threads = std::move(toy.threads);
  } else {
    const auto& s = config.data;
    if (!s.corpus.empty()) {
      for (auto& r : read_jsonl<TextRecord>(s.corpus)) d.corpus.push_back(std::move(r.text));
    }
    if (!s.pairs.empty()) raw_pairs = read_jsonl<PairRecord>(s.pairs);
    if (!s.labeled.empty()) d.labeled = read_jsonl<LabeledRecord>(s.labeled);
    if (!s.labeled_eval.empty()) d.labeled_eval = read_jsonl<LabeledRecord>(s.labeled_eval);
    if (!s.scored.empty()) d.scored = read_jsonl<ScoredPairRecord>(s.scored);
    if (!s.scored_eval.empty()) d.scored_eval = read_jsonl<ScoredPairRecord>(s.scored_eval);
    if (!s.threads.empty()) threads = read_jsonl<QualityThread>(s.threads);
    if (!s.eval_corpus.empty()) {
      d.eval_set.name = s.eval_corpus.stem().string();
      d.eval_set.queries = read_jsonl<TextRecord>(s.eval_queries);
      d.eval_set.corpus = read_jsonl<TextRecord>(s.eval_corpus);
      d.eval_set.qrels = make_qrels(read_jsonl<QrelRecord>(s.eval_qrels));
    }
  }

  for (auto& p : raw_pairs) {
    if (overlap_filter(p.q, p.p) == FilterDecision::Keep) {
      d.pairs.push_back(std::move(p));
    } else {
      ++d.pairs_dropped;
    }
  }

  if (!d.pairs.empty()) {
    std::vector<std::string> passages;
    std::set<std::string> seen;
    for (const auto& p : d.pairs) {
      if (seen.insert(p.p).second) passages.push_back(p.p);
    }
    if (passages.size() > config.hard_negatives) {
      const Bm25Index index(passages);
      for (const auto& p : d.pairs) d.retrieval_tuples.push_back(mine_hard_negatives(p, index, config.hard_negatives, mining));
    }
  }

  if (!threads.empty()) {
    QualityConversion q = convert_quality_threads(threads, quality_rng);
    // The last quarter of the converted threads is held out for evaluation.
    const std::size_t held = q.tuples.size() / 4;
    const std::size_t train = q.tuples.size() - held;
    d.retrieval_tuples.insert(d.retrieval_tuples.end(), q.tuples.begin(), q.tuples.begin() + static_cast<std::ptrdiff_t>(train));
    if (held > 0) {
      d.failure_eval["f4"] = failure_records_from_tuples(
          std::vector<TupleRecord>(q.tuples.begin() + static_cast<std::ptrdiff_t>(train), q.tuples.end()), FailureKind::F4);
    }
  }

  const std::size_t per_case = config.data.toy ? config.data.toy->failures_per_case : 24;
  for (FailureKind kind : {FailureKind::F1, FailureKind::F2, FailureKind::F3}) {
    const std::string name = to_string(kind);
    auto train = failure_records_to_tuples(gen_failure_case(kind, per_case, failure_rng), name);
    d.retrieval_tuples.insert(d.retrieval_tuples.end(), train.begin(), train.end());
    d.failure_eval[name] = gen_failure_case(kind, std::max<std::size_t>(4, per_case / 2), failure_rng);
  }

  if (!d.labeled.empty()) d.class_tuples = build_class_tuples(d.labeled, tuples_rng);

  if (!out_dir.empty()) {
    const auto dir = out_dir;
    write_file_atomic(dir / "pairs.filtered.jsonl", to_jsonl(d.pairs));
    write_file_atomic(dir / "tuples.retrieval.jsonl", to_jsonl(d.retrieval_tuples));
    write_file_atomic(dir / "tuples.classification.jsonl", to_jsonl(d.class_tuples));
    for (const auto& [kind, records] : d.failure_eval) {
      write_file_atomic(dir / ("failures." + kind + ".jsonl"), to_jsonl(records));
    }
  }
  return d;
}

EncoderModel initial_model(const RunConfig& config, const PreparedData& data) {
  const auto texts = data.vocabulary_texts();
  if (texts.empty()) throw DataError("no training text to build a vocabulary from");
  Vocab vocab = Vocab::build(texts, config.max_vocab_words);
  ModelConfig mc = config.model;
  mc.vocab_size = vocab.size();
  return EncoderModel(mc, std::move(vocab));
}

namespace {

json log_to_json(const StagePlan& plan, const TrainLog& log) {
  json steps = json::array();
  for (const auto& s : log.steps) {
    steps.push_back({{"phase", s.phase}, {"step", s.step}, {"dataset", s.dataset}, {"loss", s.loss}, {"lr", s.lr}});
  }
  return json{{"plan", stage_plan_to_json(plan)},
              {"steps", std::move(steps)},
              {"reshuffles", log.reshuffles},
              {"skipped_batches", log.skipped_batches}};
}

}  // namespace

EncodingSetup default_retrieval_setup(const EncoderModel& model, bool instructions) {
  if (model.has_adapter(TaskKind::RetrievalQuery)) {
    const TaskKind doc =
        model.has_adapter(TaskKind::RetrievalPassage) ? TaskKind::RetrievalPassage : TaskKind::RetrievalQuery;
    return {TaskKind::RetrievalQuery, doc, instructions};
  }
  return {TaskKind::None, TaskKind::None, instructions};
}

TaskKind task_or_base(const EncoderModel& model, TaskKind task) {
  return model.has_adapter(task) ? task : TaskKind::None;
}

json run_stages(EncoderModel& model, const RunConfig& config, const PreparedData& data, int stage,
                std::optional<TaskKind> only_task) {
  json logs = json::array();
  for (const auto& plan : config.stages) {
    if (plan.stage != stage) continue;
    if (only_task && config.find_stage(3, *only_task) != &plan) continue;
    TrainLog log;
    switch (stage) {
      case 1: log = run_stage1(model, data.corpus, plan); break;
      case 2: log = run_stage2(model, data.pairs, plan); break;
      default: log = run_stage3(model, data.adapter_data(plan.task), plan); break;
    }
    logs.push_back(log_to_json(plan, log));
  }
  return logs;
}

json evaluate_model(const EncoderModel& model, const RunConfig& config, const PreparedData& data) {
  json reports = json::array();
  const std::uint64_t seed = config.seed;
  const EncodingSetup setup = default_retrieval_setup(model, config.eval.instructions);
  if (!data.eval_set.corpus.empty()) {
    reports.push_back(evaluate_retrieval(model, data.eval_set, config.eval.dim, setup, seed).to_json());
    for (const auto& r : mrl_sweep(model, data.eval_set, config.eval.sweep_dims, setup, seed)) {
      reports.push_back(r.to_json());
    }
  }
  if (data.scored_eval.size() >= 2) {
    reports.push_back(
        evaluate_sts(model, data.scored_eval, config.eval.dim, task_or_base(model, TaskKind::TextMatching), seed).to_json());
  }
  if (!data.labeled.empty() && !data.labeled_eval.empty()) {
    reports.push_back(evaluate_classification(model, data.labeled, data.labeled_eval, config.eval.dim,
                                              task_or_base(model, TaskKind::Classification), seed)
                          .to_json());
    reports.push_back(evaluate_clustering(model, data.labeled_eval, config.eval.dim,
                                          task_or_base(model, TaskKind::Separation), seed)
                          .to_json());
  }
  if (config.eval.failures) {
    for (const auto& [kind, records] : data.failure_eval) {
      reports.push_back(failure_eval(model, records, kind, config.eval.dim, setup, seed).to_json());
    }
  }
  return reports;
}

AblationReport run_ablation(const EncoderModel& stage2, const RunConfig& config, const PreparedData& data) {
  const StagePlan* retrieval = config.find_stage(3, TaskKind::RetrievalQuery);
  if (retrieval == nullptr) throw std::invalid_argument("the ablation needs a retrieval stage plan");
  if (data.eval_set.corpus.empty()) throw std::invalid_argument("the ablation needs a retrieval evaluation set");
  std::vector<EncoderModel> variants;
  std::vector<AblationVariant> cells;
  variants.reserve(4);
  for (bool two : {false, true}) {
    for (bool instr : {false, true}) {
      StagePlan plan = *retrieval;
      plan.two_retrieval_adapters = two;
      plan.instructions = instr;
      variants.push_back(stage2.clone());
      run_stage3(variants.back(), data.adapter_data(TaskKind::RetrievalQuery), plan);
      cells.push_back({&variants.back(), two, instr});
    }
  }
  const std::vector<RetrievalSet> sets{data.eval_set};
  return adapter_ablation(cells, sets, config.eval.dim);
}

PipelineResult run_pipeline(const RunConfig& config) {
  config.validate();
  if (config.output_dir.empty()) throw std::invalid_argument("run config needs an output_dir");
  PipelineResult result;
  const auto out = config.output_dir;
  const PreparedData data = prepare_data(config, out / "data");
  for (const char* f : {"pairs.filtered.jsonl", "tuples.retrieval.jsonl", "tuples.classification.jsonl"}) {
    result.files.push_back(out / "data" / f);
  }
  for (const auto& [kind, records] : data.failure_eval) result.files.push_back(out / "data" / ("failures." + kind + ".jsonl"));

  EncoderModel model = initial_model(config, data);
  json logs = json::object();
  std::optional<EncoderModel> stage2_snapshot;
  for (int stage = 1; stage <= 3; ++stage) {
    logs["stage" + std::to_string(stage)] = run_stages(model, config, data, stage);
    const auto path = out / "checkpoints" / ("stage" + std::to_string(stage) + ".ckpt");
    save_checkpoint(model, nullptr, path);
    result.files.push_back(path);
    result.files.push_back(path.string() + ".meta.json");
    if (stage == 2 && config.eval.ablation) stage2_snapshot = model.clone();
  }

  json reports{{"reports", evaluate_model(model, config, data)}};
  if (config.eval.ablation) {
    const AblationReport ablation = run_ablation(*stage2_snapshot, config, data);
    reports["ablation"] = ablation.to_json();
    write_file_atomic(out / "reports" / "ablation.txt", ablation.render());
    result.files.push_back(out / "reports" / "ablation.txt");
  }

  write_file_atomic(out / "train_log.json", logs.dump(1) + "\n");
  result.files.push_back(out / "train_log.json");
  write_file_atomic(out / "reports" / "eval.json", reports.dump(2) + "\n");
  result.files.push_back(out / "reports" / "eval.json");
  result.reports = std::move(reports);
  return result;
}

}  // namespace taskemb
