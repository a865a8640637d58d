#include "cli.hpp"

#include "taskemb/checkpoint.hpp"
#include "taskemb/pipeline.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace taskemb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Two training steps per stage on a 16-wide, one-layer model.
json tiny_run_config(const std::string& output_dir) {
  const json phase = {{"steps", 2}, {"batch_size", 4}, {"seq_len", 16}};
  return json{
      {"seed", 3},
      {"output_dir", output_dir},
      {"model",
       {{"d_model", 16}, {"n_layers", 1}, {"n_heads", 2}, {"d_ff", 32}, {"max_seq_len", 32}, {"lora_rank", 2},
        {"mrl_dims", {4, 8, 16}}}},
      {"data", {{"toy", {{"corpus", 40}, {"pairs", 64}, {"threads", 24}, {"failures_per_case", 8}}}}},
      {"stages",
       {{{"stage", 1}, {"phases", {phase}}},
        {{"stage", 2}, {"phases", {phase}}},
        {{"stage", 3}, {"task", "retrieval.query"}, {"phases", {phase}}},
        {{"stage", 3}, {"task", "classification"}, {"phases", {phase}}}}},
      {"eval", {{"dim", 16}, {"sweep_dims", {4, 8, 16}}, {"failures", true}}},
  };
}

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("taskemb-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(RunConfig, SeedIsMandatory) {
  json j = tiny_run_config("out");
  j.erase("seed");
  EXPECT_THROW(RunConfig::from_json(j), std::invalid_argument);
}

TEST(RunConfig, UnknownKeysAreRejected) {
  json j = tiny_run_config("out");
  j["learning_rate"] = 1.0;
  EXPECT_THROW(RunConfig::from_json(j), std::invalid_argument);
  json k = tiny_run_config("out");
  k["model"]["vocab_size"] = 100;
  EXPECT_THROW(RunConfig::from_json(k), std::invalid_argument);
  json m = tiny_run_config("out");
  m["stages"][0]["phases"][0]["momentum"] = 0.9;
  EXPECT_THROW(RunConfig::from_json(m), std::invalid_argument);
}

TEST(RunConfig, DefaultsAndRoundTrip) {
  const RunConfig c = RunConfig::from_json(json{{"seed", 5}});
  EXPECT_TRUE(c.data.toy.has_value());
  EXPECT_EQ(c.model.seed, 5u);
  ASSERT_NE(c.find_stage(1), nullptr);
  ASSERT_NE(c.find_stage(2), nullptr);
  ASSERT_NE(c.find_stage(3, TaskKind::RetrievalPassage), nullptr);
  EXPECT_EQ(c.find_stage(3, TaskKind::RetrievalPassage), c.find_stage(3, TaskKind::RetrievalQuery));
  for (const auto& plan : c.stages) {
    const StagePlan back = stage_plan_from_json(stage_plan_to_json(plan), 0);
    EXPECT_EQ(stage_plan_to_json(back), stage_plan_to_json(plan));
  }
}

TEST(RunConfig, EvalDimsMustBeModelDims) {
  json j = tiny_run_config("out");
  j["eval"]["dim"] = 32;
  EXPECT_THROW(RunConfig::from_json(j).validate(), std::invalid_argument);
}

TEST(RunConfig, MissingDataFileIsDataError) {
  json j = tiny_run_config("out");
  j["data"] = {{"pairs", "does-not-exist.jsonl"}};
  EXPECT_THROW(RunConfig::from_json(j, "/nonexistent").validate(), DataError);
}

TEST(RunConfig, MalformedFileIsDataError) {
  TempDir dir;
  write_text(dir.path() / "bad.json", "{ \"seed\": ");
  EXPECT_THROW(RunConfig::load(dir.path() / "bad.json"), DataError);
}

TEST(Pipeline, TinyRunWritesArtifactsDeterministically) {
  TempDir dir;
  std::map<std::string, std::string> first;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = dir.path() / ("run" + std::to_string(run));
    const RunConfig config = RunConfig::from_json(tiny_run_config(out.string()));
    const PipelineResult result = run_pipeline(config);
    EXPECT_TRUE(fs::exists(out / "checkpoints" / "stage3.ckpt"));
    EXPECT_TRUE(fs::exists(out / "reports" / "eval.json"));
    EXPECT_TRUE(fs::exists(out / "train_log.json"));
    EXPECT_TRUE(result.reports.contains("reports"));
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
      if (!entry.is_regular_file()) continue;
      const std::string rel = fs::relative(entry.path(), out).string();
      const std::string bytes = read_text(entry.path());
      if (run == 0) {
        first[rel] = bytes;
      } else {
        ASSERT_TRUE(first.count(rel)) << rel;
        EXPECT_TRUE(first[rel] == bytes) << rel << " differs between runs";
      }
    }
  }
  const EncoderModel model = load_checkpoint(dir.path() / "run0" / "checkpoints" / "stage3.ckpt");
  EXPECT_EQ(model.stage_completed, 3);
  EXPECT_TRUE(model.has_adapter(TaskKind::RetrievalQuery));
  EXPECT_TRUE(model.has_adapter(TaskKind::RetrievalPassage));
  EXPECT_TRUE(model.has_adapter(TaskKind::Classification));
}

TEST(Cli, NoArgumentsIsUsageError) {
  const auto r = cli_run({});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, UnknownCommandAndFlag) {
  EXPECT_EQ(cli_run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(cli_run({"encode", "--bogus"}).code, cli::kExitUsage);
}

TEST(Cli, HelpSucceeds) {
  const auto r = cli_run({"--help"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find("encode"), std::string::npos);
}

TEST(Cli, MalformedCheckpointIsDataError) {
  TempDir dir;
  write_text(dir.path() / "bad.ckpt", "not a checkpoint");
  write_text(dir.path() / "texts.jsonl", "{\"id\": \"a\", \"text\": \"hello\"}\n");
  const auto r = cli_run({"encode", "--checkpoint", (dir.path() / "bad.ckpt").string(), "--task", "none", "--dim", "8",
                          "--input", (dir.path() / "texts.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitData) << r.err;
}

TEST(Cli, MalformedJsonlIsDataError) {
  TempDir dir;
  write_text(dir.path() / "pairs.jsonl", "{\"q\": \"only a query\"}\n");
  const auto r = cli_run({"prepare-data", "filter-pairs", "--input", (dir.path() / "pairs.jsonl").string(), "--output",
                          (dir.path() / "out.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitData) << r.err;
}

TEST(Cli, TrainEncodeAndEvaluate) {
  TempDir dir;
  const fs::path cfg = dir.path() / "config.json";
  write_text(cfg, tiny_run_config((dir.path() / "out").string()).dump());
  const std::string s1 = (dir.path() / "s1.ckpt").string(), s2 = (dir.path() / "s2.ckpt").string(),
                    s3 = (dir.path() / "s3.ckpt").string();
  ASSERT_EQ(cli_run({"pretrain", "--config", cfg.string(), "--output", s1}).code, 0);
  ASSERT_EQ(cli_run({"train-pairs", "--config", cfg.string(), "--checkpoint", s1, "--output", s2}).code, 0);
  const auto unknown = cli_run({"train-adapter", "--config", cfg.string(), "--checkpoint", s2, "--task", "summarize",
                                "--output", s3});
  EXPECT_EQ(unknown.code, cli::kExitUsage);
  EXPECT_NE(unknown.err.find("retrieval.query"), std::string::npos);
  ASSERT_EQ(cli_run({"train-adapter", "--config", cfg.string(), "--checkpoint", s2, "--task", "retrieval.query",
                     "--output", s3})
                .code,
            0);

  const fs::path texts = dir.path() / "texts.jsonl";
  write_text(texts, "{\"id\": \"a\", \"text\": \"alpha beta\"}\n{\"id\": \"b\", \"text\": \"gamma\"}\n");
  const auto enc = cli_run({"encode", "--checkpoint", s3, "--task", "retrieval.query", "--dim", "8", "--input",
                            texts.string()});
  ASSERT_EQ(enc.code, 0) << enc.err;
  std::istringstream lines(enc.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    const auto v = j["vec"].get<std::vector<double>>();
    ASSERT_EQ(v.size(), 8u);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    ++count;
  }
  EXPECT_EQ(count, 2);
  EXPECT_EQ(cli_run({"encode", "--checkpoint", s3, "--task", "retrieval.query", "--dim", "5", "--input",
                     texts.string()})
                .code,
            cli::kExitUsage);
  EXPECT_EQ(cli_run({"encode", "--checkpoint", s3, "--task", "separation", "--dim", "8", "--input", texts.string()})
                .code,
            cli::kExitUsage);

  const fs::path toy = dir.path() / "toy";
  ASSERT_EQ(cli_run({"prepare-data", "gen-toy", "--seed", "4", "--output-dir", toy.string()}).code, 0);
  const fs::path f4 = dir.path() / "f4.jsonl";
  ASSERT_EQ(cli_run({"prepare-data", "quality-convert", "--input", (toy / "threads.jsonl").string(), "--output",
                     f4.string(), "--seed", "2"})
                .code,
            0);
  const auto fail = cli_run({"--json", "eval", "failures", "--checkpoint", s3, "--case", "f4", "--input", f4.string(),
                             "--dim", "16"});
  ASSERT_EQ(fail.code, 0) << fail.err;
  const json report = json::parse(fail.out);
  EXPECT_TRUE(report["metrics"].contains("map"));
  EXPECT_EQ(report["task"], "failures/f4");

  const auto ret = cli_run({"--json", "eval", "retrieval", "--checkpoint", s3, "--queries",
                            (toy / "eval_queries.jsonl").string(), "--corpus", (toy / "eval_corpus.jsonl").string(),
                            "--qrels", (toy / "eval_qrels.jsonl").string(), "--dim", "16"});
  ASSERT_EQ(ret.code, 0) << ret.err;
  EXPECT_TRUE(json::parse(ret.out)["metrics"].contains("ndcg@10"));
}
