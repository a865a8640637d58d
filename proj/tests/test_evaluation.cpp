#include "test_util.hpp"

#include "taskemb/evaluation.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

using namespace taskemb;

namespace {

RetrievalSet tiny_set() {
  RetrievalSet set;
  set.name = "tiny";
  const auto corpus = testutil::tiny_corpus();
  for (std::size_t i = 0; i < corpus.size(); ++i) set.corpus.push_back({"d" + std::to_string(i), corpus[i]});
  set.queries = {{"q0", "the cat sat"}, {"q1", "boats on the sea"}, {"q2", "warm meal"}};
  set.qrels = {{"q0", {{"d0", 1.0}}}, {"q1", {{"d4", 2.0}, {"d1", 1.0}}}, {"q2", {{"d3", 1.0}}}};
  return set;
}

EncoderModel model_with_fresh_adapters() {
  EncoderModel model = testutil::tiny_model(5);
  for (TaskKind t : kAdapterTasks) model.add_adapter(t);
  return model;
}

class ScopedEnv {
public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) {
      setenv(name, value, 1);
    } else {
      unsetenv(name);
    }
  }
  ~ScopedEnv() {
    if (old_) {
      setenv(name_, old_->c_str(), 1);
    } else {
      unsetenv(name_);
    }
  }

private:
  const char* name_;
  std::optional<std::string> old_;
};

}  // namespace

TEST(Retrieval, RankingsCoverTheCorpusWithIdTieBreak) {
  const EncoderModel model = testutil::tiny_model(5);
  RetrievalSet set = tiny_set();
  set.corpus.push_back({"a-dup", set.corpus[0].text});
  set.corpus.push_back({"z-dup", set.corpus[0].text});
  const auto rankings = rank_documents(model, set, 16, {TaskKind::None, TaskKind::None, false});
  ASSERT_EQ(rankings.size(), 3u);
  for (const auto& [qid, ranking] : rankings) {
    EXPECT_EQ(ranking.size(), set.corpus.size());
    const auto a = std::find(ranking.begin(), ranking.end(), "a-dup");
    const auto d0 = std::find(ranking.begin(), ranking.end(), "d0");
    const auto z = std::find(ranking.begin(), ranking.end(), "z-dup");
    EXPECT_EQ(d0 - a, 1);
    EXPECT_EQ(z - d0, 1);
  }
}

TEST(Retrieval, ReportMatchesMetricOracle) {
  const EncoderModel model = testutil::tiny_model(6);
  const RetrievalSet set = tiny_set();
  const EncodingSetup setup{TaskKind::None, TaskKind::None, false};
  const auto rankings = rank_documents(model, set, 8, setup);
  double expected = 0.0;
  for (const auto& [qid, rel] : set.qrels) expected += oracle::ndcg(rankings.at(qid), rel, 10) / 3.0;
  const EvalReport r = evaluate_retrieval(model, set, 8, setup, 4);
  EXPECT_NEAR(r.metrics.at("ndcg@10"), expected, 1e-12);
  EXPECT_EQ(r.metrics.at("queries"), 3.0);
  EXPECT_EQ(r.dim, 8u);
  EXPECT_EQ(r.seed, 4u);
  EXPECT_EQ(r.task, "retrieval");
}

TEST(MrlSweep, SingleDimEqualsPlainRun) {
  const EncoderModel model = testutil::tiny_model(7);
  const RetrievalSet set = tiny_set();
  const EncodingSetup setup{TaskKind::None, TaskKind::None, false};
  const std::vector<std::size_t> dims{8};
  const auto sweep = mrl_sweep(model, set, dims, setup);
  ASSERT_EQ(sweep.size(), 1u);
  const auto plain = evaluate_retrieval(model, set, 8, setup);
  EXPECT_EQ(sweep[0].metrics.at("ndcg@10"), plain.metrics.at("ndcg@10"));
  EXPECT_EQ(sweep[0].metrics.at("map"), plain.metrics.at("map"));
  EXPECT_EQ(sweep[0].metrics.at("delta_ndcg@10"), 0.0);
}

TEST(MrlSweep, DeltasAreRelativeToSmallestDim) {
  const EncoderModel model = testutil::tiny_model(8);
  const RetrievalSet set = tiny_set();
  const EncodingSetup setup{TaskKind::None, TaskKind::None, false};
  const std::vector<std::size_t> dims{16, 4, 8};
  const auto sweep = mrl_sweep(model, set, dims, setup);
  ASSERT_EQ(sweep.size(), 3u);
  for (const auto& r : sweep) {
    EXPECT_NEAR(r.metrics.at("delta_ndcg@10"), r.metrics.at("ndcg@10") - sweep[1].metrics.at("ndcg@10"), 1e-15);
  }
  EXPECT_THROW(mrl_sweep(model, set, std::vector<std::size_t>{}, setup), std::invalid_argument);
}

TEST(Ablation, FreshAdaptersMakeAdapterCountIrrelevant) {
  const EncoderModel model = model_with_fresh_adapters();
  const std::vector<AblationVariant> variants{
      {&model, false, false}, {&model, false, true}, {&model, true, false}, {&model, true, true}};
  const std::vector<RetrievalSet> sets{tiny_set()};
  const auto report = adapter_ablation(variants, sets, 16);
  ASSERT_EQ(report.cells.size(), 4u);
  EXPECT_EQ(report.cells[0].average, report.cells[2].average);
  EXPECT_EQ(report.cells[1].average, report.cells[3].average);
  EXPECT_EQ(report.one_adapter_average, report.two_adapter_average);
  const auto& c = report.cells;
  EXPECT_NEAR(report.with_instructions_average, (c[1].average + c[3].average) / 2.0, 1e-15);
  EXPECT_NEAR(report.without_instructions_average, (c[0].average + c[2].average) / 2.0, 1e-15);
  const auto direct = evaluate_retrieval(model, sets[0], 16, {TaskKind::RetrievalQuery, TaskKind::RetrievalPassage, true});
  EXPECT_EQ(c[3].scores.at("tiny"), direct.metrics.at("ndcg@10"));
  const auto j = report.to_json();
  EXPECT_EQ(j["cells"].size(), 4u);
  EXPECT_TRUE(j["two_adapters_at_least_one"].get<bool>());
  EXPECT_NE(report.render().find("average"), std::string::npos);
}

TEST(Ablation, MissingVariantIsRejected) {
  const EncoderModel model = model_with_fresh_adapters();
  const std::vector<AblationVariant> variants{{&model, false, false}, {&model, true, true}};
  const std::vector<RetrievalSet> sets{tiny_set()};
  EXPECT_THROW(adapter_ablation(variants, sets, 16), std::invalid_argument);
}

TEST(FailureEval, GoldFirstScoresOne) {
  const EncoderModel model = testutil::tiny_model(9);
  const std::vector<FailureRecord> records{{"f1", "the cat sat on the mat", "the cat sat on the mat",
                                            {"a dog ran", "boats sail", "stars shine", "the chef cooked", "music fills",
                                             "warm meal", "quiet room"}}};
  const auto r = failure_eval(model, records, "f1", 16, {TaskKind::None, TaskKind::None, false});
  EXPECT_NEAR(r.metrics.at("map"), 1.0, 1e-15);
  EXPECT_NEAR(r.metrics.at("ndcg@10"), 1.0, 1e-15);
  EXPECT_EQ(r.task, "failures/f1");
}

TEST(FailureEval, TiesRankGoldLast) {
  const EncoderModel model = testutil::tiny_model(10);
  const std::string text = "boats sail across the sea";
  const std::vector<FailureRecord> records{{"f2", text, text, std::vector<std::string>(7, text)}};
  const auto r = failure_eval(model, records, "f2", 16, {TaskKind::None, TaskKind::None, false});
  EXPECT_NEAR(r.metrics.at("map"), 1.0 / 8.0, 1e-15);
  EXPECT_NEAR(r.metrics.at("ndcg@10"), 1.0 / std::log2(9.0), 1e-15);
}

TEST(FailureEval, RejectsMalformedRecords) {
  const EncoderModel model = testutil::tiny_model(11);
  EXPECT_THROW(failure_eval(model, {}, "f1", 16, {}), std::invalid_argument);
  const std::vector<FailureRecord> bad{{"f1", "q", "", {"x"}}};
  EXPECT_THROW(failure_eval(model, bad, "f1", 16, {TaskKind::None, TaskKind::None, false}), std::invalid_argument);
}

TEST(Reports, TimestampFollowsSourceDateEpoch) {
  {
    ScopedEnv env("SOURCE_DATE_EPOCH", nullptr);
    EXPECT_EQ(report_timestamp(), "1970-01-01T00:00:00Z");
  }
  {
    ScopedEnv env("SOURCE_DATE_EPOCH", "86461");
    EXPECT_EQ(report_timestamp(), "1970-01-02T00:01:01Z");
  }
  {
    ScopedEnv env("SOURCE_DATE_EPOCH", "soon");
    EXPECT_THROW(report_timestamp(), std::invalid_argument);
  }
}

TEST(Reports, JsonCarriesEveryField) {
  const EncoderModel model = testutil::tiny_model(12);
  const auto r = evaluate_retrieval(model, tiny_set(), 4, {TaskKind::None, TaskKind::None, false}, 3);
  const auto j = r.to_json();
  for (const char* key : {"run_id", "task", "adapters", "instructions", "dim", "metrics", "seed", "timestamp"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["dim"].get<std::size_t>(), 4u);
  EXPECT_TRUE(j["metrics"].contains("map"));
}

TEST(Sts, PerfectOrderingGivesOne) {
  const EncoderModel model = testutil::tiny_model(13);
  // Gold scores follow the model's own cosines, so the rank correlation is 1.
  std::vector<ScoredPairRecord> pairs{{"the cat sat", "the cat sat", 0.0, 5.0, "s"},
                                      {"the cat sat", "boats sail across the sea", 0.0, 5.0, "s"},
                                      {"music fills the quiet room", "stars shine in the night sky", 0.0, 5.0, "s"},
                                      {"a dog ran", "the chef cooked a warm meal", 0.0, 5.0, "s"}};
  for (auto& p : pairs) {
    const std::vector<std::string> a{p.q}, b{p.p};
    const auto ea = testutil::to_vec(embed(model, a, TaskKind::None, 16));
    const auto eb = testutil::to_vec(embed(model, b, TaskKind::None, 16));
    p.score = 2.5 + 2.5 * oracle::dot(ea, eb);
  }
  const auto r = evaluate_sts(model, pairs, 16, TaskKind::None);
  EXPECT_NEAR(r.metrics.at("spearman"), 1.0, 1e-12);
}
