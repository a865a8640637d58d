// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: acceptance [output_dir]

#include "../test_util.hpp"

#include "taskemb/data.hpp"
#include "taskemb/encoder.hpp"
#include "taskemb/evaluation.hpp"
#include "taskemb/failure_cases.hpp"
#include "taskemb/metrics.hpp"
#include "taskemb/objectives.hpp"
#include "taskemb/pipeline.hpp"
#include "taskemb/text.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

using namespace taskemb;
using testutil::random_tensor;
using testutil::to_mat;
using testutil::to_vec;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

int failures = 0;
std::map<int, std::string> results;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  results[id] = std::string(pass ? "PASS" : "FAIL") + "  criterion " + std::to_string(id) + "  " + name + ": " + detail;
  std::cerr << "[" << id << " done]" << std::endl;
}

/// Collects the worst deviation and any failed exact check for one criterion.
struct Tally {
  double worst = 0.0;
  std::vector<std::string> broken;

  void near(double got, double want, double tol, const std::string& what) {
    const double d = std::abs(got - want);
    worst = std::max(worst, d);
    if (!(d <= tol)) broken.push_back(what + fmt(" (got %.12g, want %.12g)", got, want));
  }
  void expect(bool ok, const std::string& what) {
    if (!ok) broken.push_back(what);
  }
  bool ok() const { return broken.empty(); }
  std::string failures_text() const {
    std::string s;
    for (std::size_t i = 0; i < broken.size() && i < 3; ++i) s += "; " + broken[i];
    if (broken.size() > 3) s += fmt("; and %zu more", broken.size() - 3);
    return s;
  }
};

std::vector<std::string> random_labels(Rng& rng, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(rng.index(3)));
  out[0] = out[1] = "c0";
  out[2] = "c1";
  return out;
}

std::vector<oracle::Mat> split_rows(const oracle::Mat& rows, std::size_t k, std::size_t m) {
  std::vector<oracle::Mat> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i].push_back(rows[i * m + j]);
  }
  return out;
}

const EmbeddingLoss kPairFn = [](std::span<const Tensor> e) { return pair_loss_bidirectional(e[0], e[1], 0.05); };
const std::vector<std::size_t> kMrlDims{4, 8, 16};

void criterion_gradients() {
  const auto start = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  std::size_t checks = 0;
  auto check = [&](const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
    worst = std::max(worst, grad_check(f, x));
    ++checks;
  };
  for (int batch = 0; batch < 10; ++batch) {
    std::vector<int> targets;
    for (int i = 0; i < 6; ++i) targets.push_back(static_cast<int>(rng.index(9)));
    const std::vector<std::size_t> masked{0, 2, 5};
    check([&](const Tensor& x) { return mlm_loss(x, targets, masked); }, random_tensor(rng, {6, 9}));

    check([](const Tensor& x) { return pair_loss_bidirectional(slice(x, 0, 4, 0, 8), slice(x, 4, 4, 0, 8), 0.05); },
          random_tensor(rng, {8, 8}));

    check([](const Tensor& x) {
      return triplet_loss(slice(x, 0, 3, 0, 8), slice(x, 3, 3, 0, 8), slice(x, 6, 6, 0, 8), 2, 0.05);
    }, random_tensor(rng, {12, 8}));

    std::vector<double> zeta;
    for (int i = 0; i < 4; ++i) zeta.push_back(rng.uniform());
    check([&](const Tensor& x) {
      return cosent_loss(diagonal(cosine_similarity_matrix(slice(x, 0, 4, 0, 8), slice(x, 4, 4, 0, 8))), zeta, 0.05);
    }, random_tensor(rng, {8, 8}));

    const auto labels = random_labels(rng, 6);
    check([&](const Tensor& x) { return separation_loss(x, labels, 0.02).loss; }, random_tensor(rng, {6, 8}));

    check([](const Tensor& x) {
      const std::vector<Tensor> embs{slice(x, 0, 4, 0, 16), slice(x, 4, 4, 0, 16)};
      return mrl_loss(kPairFn, embs, kMrlDims, std::vector<double>(3, 1.0), kMrlDims);
    }, random_tensor(rng, {8, 16}));
  }
  const double elapsed = seconds_since(start);
  report(1, "gradient correctness", worst < 1e-4 && elapsed < 60.0,
         fmt("max relative error %.3g over %zu checks (6 losses x 10 batches, tol 1e-4), %.2f s (limit 60 s)", worst,
             checks, elapsed));
}

void criterion_loss_oracles() {
  Rng rng(102);
  Tally t;
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor logits = random_tensor(rng, {5, 7}, false, 2.0);
    std::vector<int> targets;
    for (int i = 0; i < 5; ++i) targets.push_back(static_cast<int>(rng.index(7)));
    const std::vector<std::size_t> masked{1, 3, 4};
    t.near(mlm_loss(logits, targets, masked).item(), oracle::mlm(to_mat(logits), targets, masked), 1e-10, "mlm");

    const Tensor s = random_tensor(rng, {5, 5});
    t.near(info_nce(s, 0.05).item(), oracle::info_nce(to_mat(s), 0.05), 1e-10, "info_nce");

    const Tensor q = random_tensor(rng, {4, 16}), p = random_tensor(rng, {4, 16});
    t.near(pair_loss_bidirectional(q, p, 0.05).item(), oracle::pair_loss(to_mat(q), to_mat(p), 0.05), 1e-10, "pair");

    const Tensor n = random_tensor(rng, {28, 16});
    t.near(triplet_loss(q, p, n, 7, 0.05).item(),
           oracle::triplet_loss(to_mat(q), to_mat(p), split_rows(to_mat(n), 4, 7), 0.05), 1e-10, "triplet");

    const Tensor scores = random_tensor(rng, {5}, false, 0.5);
    std::vector<double> zeta;
    for (int i = 0; i < 5; ++i) zeta.push_back(rng.uniform());
    t.near(cosent_loss(scores, zeta, 0.05).item(), oracle::cosent(to_vec(scores), zeta, 0.05), 1e-10, "cosent");

    const Tensor e = random_tensor(rng, {6, 8});
    const auto labels = random_labels(rng, 6);
    t.near(separation_loss(e, labels, 0.02).loss.item(), oracle::separation(to_mat(e), labels, 0.02), 1e-10,
           "separation");

    const std::vector<Tensor> embs{q, p};
    double mrl_expected = 0.0;
    for (auto d : kMrlDims) {
      mrl_expected += oracle::pair_loss(oracle::truncate(to_mat(q), d), oracle::truncate(to_mat(p), d), 0.05) / 3.0;
    }
    t.near(mrl_loss(kPairFn, embs, kMrlDims, std::vector<double>(3, 1.0 / 3.0), std::vector<std::size_t>{4, 8, 16})
               .item(),
           mrl_expected, 1e-10, "mrl");
  }
  const double k1 = info_nce(Tensor::from({1, 1}, {0.37}), 0.05).item();
  const double k2 = info_nce(Tensor::from({2, 2}, {0.2, 0.2, 0.2, 0.2}), 0.05).item();
  t.near(k1, 0.0, 1e-10, "info_nce k=1 anchor");
  t.near(k2, 2.0 * std::log(2.0), 1e-10, "info_nce uniform k=2 anchor");
  report(2, "loss oracles", t.ok(),
         fmt("7 losses x 100 random batches, max |diff| %.3g (tol 1e-10); info_nce(k=1) = %.3g, uniform k=2 = %.6f",
             t.worst, k1, k2) +
             t.failures_text());
}

std::string base_bytes(const EncoderModel& model) {
  std::string bytes;
  for (const auto& [name, tensor] : model.named_base_parameters()) {
    bytes += name;
    const auto d = tensor.data();
    bytes.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
  }
  return bytes;
}

void criterion_rope() {
  Rng rng(104);
  Tally t;
  auto head_dot = [](const Tensor& a, const Tensor& b, std::size_t head, std::size_t hd) {
    double s = 0.0;
    for (std::size_t i = head * hd; i < (head + 1) * hd; ++i) s += a.data()[i] * b.data()[i];
    return s;
  };
  for (double base : {10000.0, 20000.0}) {
    const std::string tag = fmt(" at base %.0f", base);
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor q = random_tensor(rng, {1, 16}), k = random_tensor(rng, {1, 16});
      const std::vector<std::size_t> zero{0};
      const auto r0 = apply_rope(q, k, zero, 8, base);
      t.near(testutil::max_abs_diff(r0.q, q), 0.0, 1e-10, "zero-position identity q" + tag);
      t.near(testutil::max_abs_diff(r0.k, k), 0.0, 1e-10, "zero-position identity k" + tag);

      const std::size_t pos = rng.index(4096);
      const std::vector<std::size_t> at{pos};
      const auto r = apply_rope(q, k, at, 8, base);
      for (std::size_t h = 0; h < 2; ++h) {
        t.near(std::sqrt(head_dot(r.q, r.q, h, 8)), std::sqrt(head_dot(q, q, h, 8)), 1e-10, "norm q" + tag);
        t.near(std::sqrt(head_dot(r.k, r.k, h, 8)), std::sqrt(head_dot(k, k, h, 8)), 1e-10, "norm k" + tag);
      }

      const std::size_t m = rng.index(500), n = rng.index(500), shift = rng.index(1000);
      const std::vector<std::size_t> pm{m}, pn{n}, pms{m + shift}, pns{n + shift};
      const Tensor qm = apply_rope(q, k, pm, 8, base).q, kn = apply_rope(q, k, pn, 8, base).k;
      const Tensor qms = apply_rope(q, k, pms, 8, base).q, kns = apply_rope(q, k, pns, 8, base).k;
      for (std::size_t h = 0; h < 2; ++h) {
        const double before = head_dot(qm, kn, h, 8), after = head_dot(qms, kns, h, 8);
        const double d = std::abs(before - after);
        if (d > 1e-8) t.broken.push_back("shift invariance" + tag + fmt(" (diff %.3g)", d));
      }
    }
  }
  report(4, "rotary position invariants", t.ok(),
         fmt("bases 10000 and 20000, identity/norm max |diff| %.3g (tol 1e-10), logit shift tol 1e-8", t.worst) +
             t.failures_text());
}

void criterion_data_procedures() {
  Tally t;
  t.expect(overlap_filter("red green blue", "cat dog bird fish") == FilterDecision::Keep, "disjoint keeps");
  t.expect(overlap_filter("cat dog bird", "the cat and the dog saw a bird") == FilterDecision::Keep,
           "three-word floor keeps");
  t.expect(overlap_filter("cat dog bird fish frog", "the cat and dog with a bird and fish today") == FilterDecision::Drop,
           "five words with four substrings drops");
  t.expect(overlap_filter("Cat Ten Ate Con", "concatenated strings everywhere in files today") == FilterDecision::Drop,
           "case-insensitive substring matching drops");

  {
    Rng rng(1);
    const auto none = convert_quality_threads({{"q", {{"only", 0.9}}}}, rng);
    t.expect(none.tuples.empty() && none.skipped == 1, "one answer gives no tuple");
    const std::vector<QualityThread> threads{{"q", {{"best", 0.9}, {"close", 0.7}, {"weak", 0.55}}},
                                             {"other", {{"o1", 0.5}, {"o2", 0.2}, {"o3", 0.1}}}};
    const auto c = convert_quality_threads(threads, rng);
    t.expect(!c.tuples.empty(), "gap example yields a tuple");
    if (!c.tuples.empty()) {
      const auto& tuple = c.tuples[0];
      t.expect(tuple.p == "best", "positive is the 0.9 answer");
      t.expect(tuple.negatives.size() == kTupleNegatives, "exactly seven negatives");
      t.expect(c.own_negative_scores[0] == std::vector<double>{0.55}, "only the 0.55 answer passes the 0.3 gap");
      t.expect(std::count(tuple.negatives.begin(), tuple.negatives.end(), "close") == 0, "0.7 answer excluded");
      std::size_t padded = 0;
      for (const auto& n : tuple.negatives) padded += (n == "o1" || n == "o2" || n == "o3");
      t.expect(padded == 6, "six negatives padded from other threads");
    }
    const std::vector<QualityThread> tie{{"q", {{"first", 0.8}, {"second", 0.8}, {"low", 0.1}}},
                                         {"o", {{"x", 0.3}, {"y", 0.2}}}};
    t.expect(convert_quality_threads(tie, rng).tuples.at(0).p == "first", "best-score tie takes the lowest index");
    const auto f4 = failure_records_from_tuples(c.tuples, FailureKind::F4);
    t.expect(!f4.empty() && f4[0].gold == "best" && f4[0].distractors.size() == 7, "F4 record keeps positive and negatives");
  }

  {
    Rng rng(2);
    const std::vector<LabeledRecord> labeled{{"a1", "A", "d"}, {"a2", "A", "d"}, {"b1", "B", "d"}, {"b2", "B", "d"}};
    const auto tuples = build_class_tuples(labeled, rng);
    t.expect(!tuples.empty(), "2 classes x 2 members yields tuples");
    for (const auto& tuple : tuples) {
      t.expect(tuple.negatives.size() == 7, "nine-text tuple");
      t.expect(tuple.q[0] == tuple.p[0], "q and p share a label");
      for (const auto& n : tuple.negatives) t.expect(n[0] != tuple.q[0], "negatives come from other classes");
      t.expect(std::set<std::string>(tuple.negatives.begin(), tuple.negatives.end()).size() < 7,
               "negatives drawn with replacement");
    }
  }

  {
    const TupleRecord tuple{"q", "p", {"n1", "n2", "n3", "n4", "n5", "n6", "n7"}, "d"};
    const auto u = append_unique_id(tuple, "t01");
    t.expect(std::string_view(u.q).ends_with(" t01") && std::string_view(u.p).ends_with(" t01"), "id appended to q and p");
    for (const auto& n : u.negatives) t.expect(std::string_view(n).ends_with(" t01"), "id appended to every negative");
    t.expect(append_unique_id(u, "t01").q == "q t01 t01", "applying twice appends twice");
    t.expect(Vocab::tuple_id_token(0) != Vocab::tuple_id_token(1), "in-batch ids are distinct");
  }
  report(7, "data procedures", t.ok(),
         "overlap filter, quality conversion and F4 records, class tuples, unique ids" + t.failures_text());
}

void criterion_metric_oracles() {
  Rng rng(108);
  Tally t;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> ranking;
    for (int i = 0; i < 20; ++i) ranking.push_back("d" + std::to_string(i));
    rng.shuffle(ranking);
    std::map<std::string, double> rel;
    std::set<std::string> relevant;
    const std::size_t judged = 1 + rng.index(6);
    for (std::size_t j = 0; j < judged; ++j) {
      const std::string id = "d" + std::to_string(rng.index(24));
      rel[id] = 1.0 + static_cast<double>(rng.index(3));
      relevant.insert(id);
    }
    t.near(*ndcg_at_k(ranking, rel, 10), oracle::ndcg(ranking, rel, 10), 1e-12, "ndcg@10");
    const std::vector<std::string> rel_vec(relevant.begin(), relevant.end());
    t.near(*average_precision(ranking, rel_vec), oracle::average_precision(ranking, relevant), 1e-12, "map");

    std::vector<double> x, y;
    for (int i = 0; i < 25; ++i) {
      x.push_back(static_cast<double>(rng.index(8)));
      y.push_back(rng.normal());
    }
    t.near(spearman(x, y), oracle::spearman(x, y), 1e-12, "spearman");

    std::vector<int> gold, pred;
    for (int i = 0; i < 40; ++i) {
      gold.push_back(static_cast<int>(rng.index(4)));
      pred.push_back(static_cast<int>(rng.index(5)));
    }
    t.near(v_measure(pred, gold).v, oracle::v_measure(pred, gold).v, 1e-12, "v-measure");
  }
  const double oracle_worst = t.worst;
  const std::vector<std::string> perfect{"a", "b", "c"};
  const double p1 = *ndcg_at_k(perfect, {{"a", 2.0}, {"b", 1.0}}, 10);
  const std::vector<std::string> second{"x", "a", "y"};
  const double p2 = *ndcg_at_k(second, {{"a", 1.0}}, 10);
  const std::vector<double> up{1, 2, 3, 4, 5}, down{5, 4, 3, 2, 1};
  const double rev = spearman(up, down);
  t.near(p1, 1.0, 1e-12, "perfect ranking");
  t.near(p2, 0.6309, 5e-5, "gold at rank 2");
  t.near(rev, -1.0, 1e-12, "reversed ranks");
  report(8, "metric oracles", t.ok(),
         fmt("4 metrics x 100 random instances, max |diff| %.3g (tol 1e-12); perfect %.4f, rank-2 %.4f, reversed %.4f",
             oracle_worst, p1, p2, rev) +
             t.failures_text());
}

double ndcg10(const EvalReport& r) { return r.metrics.at("ndcg@10"); }

struct SeedRun {
  double untrained = 0.0;
  double trained = 0.0;
  double seconds = 0.0;
  std::map<std::size_t, double> sweep;
  std::size_t eval_docs = 0;
  std::size_t eval_queries = 0;
  std::vector<std::string> drifted_tasks;
  std::size_t stage3_runs = 0;
  std::optional<AblationReport> ablation;
};

/// Stage I, stage II, then stage III (every task when `all_tasks`, else
/// retrieval only) with base-weight bytes compared around each adapter run.
SeedRun staged_run(std::uint64_t seed, bool all_tasks, bool ablation) {
  SeedRun out;
  const RunConfig config = RunConfig::from_json(json{{"seed", seed}});
  const PreparedData data = prepare_data(config);
  out.eval_docs = data.eval_set.corpus.size();
  out.eval_queries = data.eval_set.queries.size();
  EncoderModel model = initial_model(config, data);
  out.untrained = ndcg10(evaluate_retrieval(model, data.eval_set, 32, default_retrieval_setup(model, false)));

  const auto start = Clock::now();
  run_stages(model, config, data, 1);
  run_stages(model, config, data, 2);
  std::optional<EncoderModel> stage2;
  if (ablation) stage2 = model.clone();
  for (const auto& plan : config.stages) {
    if (plan.stage != 3) continue;
    const bool retrieval = plan.task == TaskKind::RetrievalQuery || plan.task == TaskKind::RetrievalPassage;
    if (!all_tasks && !retrieval) continue;
    const std::string before = base_bytes(model);
    run_stages(model, config, data, 3, plan.task);
    ++out.stage3_runs;
    if (base_bytes(model) != before) out.drifted_tasks.push_back(to_string(plan.task));
    if (retrieval) out.seconds = seconds_since(start);
  }
  const EncodingSetup setup = default_retrieval_setup(model, false);
  out.trained = ndcg10(evaluate_retrieval(model, data.eval_set, 32, setup));
  const std::vector<std::size_t> dims{4, 8, 16, 32};
  for (const auto& r : mrl_sweep(model, data.eval_set, dims, setup)) out.sweep[r.dim] = ndcg10(r);
  if (ablation) out.ablation = run_ablation(*stage2, config, data);
  return out;
}

void criterion_lora_identity(const SeedRun& run) {
  EncoderModel model = testutil::tiny_model(103);
  for (TaskKind task : kAdapterTasks) model.add_adapter(task);
  const auto texts = testutil::tiny_corpus();
  double worst = 0.0;
  {
    NoGradGuard guard;
    for (double base : {10000.0, 20000.0}) {
      const Tensor plain = encode_texts(model, texts, TaskKind::None, base);
      for (TaskKind task : kAdapterTasks) {
        worst = std::max(worst, testutil::max_abs_diff(encode_texts(model, texts, task, base), plain));
      }
    }
  }
  std::string drift;
  for (const auto& t : run.drifted_tasks) drift += " " + t;
  report(3, "adapter identity and frozen base", worst <= 1e-10 && run.drifted_tasks.empty() && run.stage3_runs == 4,
         fmt("fresh adapters max |diff| %.3g (tol 1e-10); base bytes unchanged across %zu stage-III runs", worst,
             run.stage3_runs) +
             (drift.empty() ? "" : "; drift in:" + drift));
}

void criterion_end_to_end(const SeedRun& run) {
  const bool sizes = run.eval_docs == 64 && run.eval_queries == 32;
  const bool pass = sizes && run.trained >= 0.8 && run.trained - run.untrained >= 0.3 && run.seconds < 300.0;
  report(5, "toy retrieval end to end", pass,
         fmt("%zu docs, %zu queries; nDCG@10 %.4f (min 0.8), untrained %.4f, gain %.4f (min 0.3); training %.1f s "
             "(limit 300 s)",
             run.eval_docs, run.eval_queries, run.trained, run.untrained, run.trained - run.untrained, run.seconds));
}

void criterion_mrl_trend(const std::vector<SeedRun>& runs) {
  int good = 0;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const double d4 = runs[i].sweep.at(4), d32 = runs[i].sweep.at(32);
    const bool ok = d32 - d4 >= -0.01;
    good += ok;
    detail += fmt("%sseed %zu: @4 %.4f @8 %.4f @16 %.4f @32 %.4f", i ? "; " : "", i + 1, d4, runs[i].sweep.at(8),
                  runs[i].sweep.at(16), d32);
  }
  report(6, "matryoshka trend", good * 2 > static_cast<int>(runs.size()),
         fmt("%d of %zu seeds with nDCG@10(32) >= nDCG@10(4) - 0.01; ", good, runs.size()) + detail);
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(entry.path(), root).string()] = s.str();
  }
  return files;
}

void criterion_determinism(const fs::path& out_dir) {
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* name : {"run_a", "run_b"}) {
    const fs::path dir = out_dir / "determinism" / name;
    fs::remove_all(dir);
    RunConfig config = RunConfig::from_json(json{{"seed", 1}});
    config.output_dir = dir;
    run_pipeline(config);
    trees.push_back(read_tree(dir));
  }
  std::vector<std::string> differing;
  std::size_t checkpoints = 0, reports = 0;
  for (const auto& [name, bytes] : trees[0]) {
    auto it = trees[1].find(name);
    if (it == trees[1].end() || it->second != bytes) differing.push_back(name);
    checkpoints += std::string_view(name).ends_with(".ckpt");
    reports += std::string_view(name).ends_with("eval.json");
  }
  if (trees[0].size() != trees[1].size()) differing.push_back("file sets differ");
  std::string detail = fmt("%zu files compared (%zu checkpoints, %zu reports)", trees[0].size(), checkpoints, reports);
  for (const auto& d : differing) detail += "; differs: " + d;
  report(9, "determinism", differing.empty() && checkpoints == 3 && reports == 1, detail);
}

void criterion_ablation(const SeedRun& run, const fs::path& out_dir) {
  if (!run.ablation) {
    report(10, "adapter ablation", false, "ablation did not run");
    return;
  }
  const AblationReport& r = *run.ablation;
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "ablation.txt", r.render());
  write_file_atomic(out_dir / "ablation.json", r.to_json().dump(2) + "\n");
  const bool direction = r.two_adapter_average >= r.one_adapter_average;
  report(10, "adapter ablation", r.cells.size() == 4 && fs::exists(out_dir / "ablation.txt"),
         fmt("4 cells written to %s; one adapter %.4f, two adapters %.4f; direction two >= one %s (not gated)",
             (out_dir / "ablation.txt").c_str(), r.one_adapter_average, r.two_adapter_average,
             direction ? "matches" : "does not match"));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  try {
    criterion_gradients();
    criterion_loss_oracles();
    criterion_rope();
    criterion_data_procedures();
    criterion_metric_oracles();

    std::vector<SeedRun> runs;
    runs.push_back(staged_run(1, true, true));
    runs.push_back(staged_run(2, false, false));
    runs.push_back(staged_run(3, false, false));
    criterion_lora_identity(runs[0]);
    criterion_end_to_end(runs[0]);
    criterion_mrl_trend(runs);
    criterion_determinism(out_dir);
    criterion_ablation(runs[0], out_dir);
  } catch (const std::exception& e) {
    for (const auto& [id, line] : results) std::cout << line << "\n";
    std::cout << "FAIL  acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  for (const auto& [id, line] : results) std::cout << line << "\n";
  std::cout << (failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
