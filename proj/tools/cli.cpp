#include "cli.hpp"

#include "taskemb/bm25.hpp"
#include "taskemb/checkpoint.hpp"
#include "taskemb/data.hpp"
#include "taskemb/failure_cases.hpp"
#include "taskemb/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

namespace taskemb::cli {

using nlohmann::json;

namespace {

/// 0 = quiet, 1 = stage summaries, 2 = every training step. Read from
/// TASKEMB_VERBOSE.
int verbosity() {
  const char* v = std::getenv("TASKEMB_VERBOSE");
  if (v == nullptr || *v == '\0') return 0;
  return std::atoi(v);
}

std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

struct Output {
  std::ostream& out;
  std::ostream& err;
  bool json_mode = false;

  void report(const EvalReport& r) const {
    if (json_mode) {
      out << r.to_json().dump() << "\n";
      return;
    }
    std::string adapters;
    for (const auto& a : r.adapters) adapters += (adapters.empty() ? "" : ",") + a;
    out << r.task << "  dim=" << r.dim << "  adapters=" << (adapters.empty() ? "none" : adapters)
        << "  instructions=" << (r.instructions ? "yes" : "no") << "\n";
    for (const auto& [name, value] : r.metrics) out << "  " << name << std::string(name.size() < 18 ? 18 - name.size() : 1, ' ') << fixed(value) << "\n";
  }

  void summary(const json& j, const std::string& text) const {
    if (json_mode) {
      out << j.dump() << "\n";
    } else {
      out << text;
    }
  }
};

void log_training(const json& logs, std::ostream& err) {
  const int v = verbosity();
  if (v <= 0) return;
  for (const auto& log : logs) {
    const auto& plan = log["plan"];
    const auto& steps = log["steps"];
    if (v >= 2) {
      for (const auto& s : steps) {
        err << "stage " << plan["stage"].get<int>() << " " << plan["task"].get<std::string>() << " phase "
            << s["phase"].get<std::size_t>() << " step " << s["step"].get<std::size_t>() << " ["
            << s["dataset"].get<std::string>() << "] loss " << fixed(s["loss"].get<double>()) << " lr "
            << s["lr"].get<double>() << "\n";
      }
    }
    err << "stage " << plan["stage"].get<int>() << " " << plan["task"].get<std::string>() << ": " << steps.size()
        << " steps";
    if (!steps.empty()) err << ", final loss " << fixed(steps.back()["loss"].get<double>());
    err << "\n";
  }
}

std::size_t total_steps(const json& logs) {
  std::size_t n = 0;
  for (const auto& log : logs) n += log["steps"].size();
  return n;
}

/// Reads failure records, or tuple records ({"q","p","negs"}) which are
/// converted to failure records of `kind`.
std::vector<FailureRecord> read_failure_input(const std::filesystem::path& path, FailureKind kind) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string first;
  while (std::getline(in, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
  }
  json probe;
  try {
    probe = json::parse(first);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ":1: " + e.what());
  }
  if (probe.is_object() && probe.contains("negs")) {
    return failure_records_from_tuples(read_jsonl<TupleRecord>(path), kind);
  }
  return read_jsonl<FailureRecord>(path);
}

RetrievalSet read_retrieval_set(const std::string& queries, const std::string& corpus, const std::string& qrels) {
  RetrievalSet set;
  set.name = std::filesystem::path(corpus).stem().string();
  set.queries = read_jsonl<TextRecord>(queries);
  set.corpus = read_jsonl<TextRecord>(corpus);
  set.qrels = make_qrels(read_jsonl<QrelRecord>(qrels));
  return set;
}

std::uint64_t seed_or_model(const std::optional<std::uint64_t>& seed, const EncoderModel& model) {
  return seed ? *seed : model.config().seed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-task text embeddings: data preparation, three-stage training, encoding and evaluation.",
               "taskemb"};
  app.fallthrough();
  app.require_subcommand(1);
  Output io{out, err};
  app.add_flag("--json", io.json_mode, "Print machine-readable JSON results");

  std::function<void()> action;
  auto bind = [&](CLI::App* cmd, std::function<void()> fn) { cmd->callback([&action, fn] { action = fn; }); };

  // prepare-data
  auto* prep = app.add_subcommand("prepare-data", "Build training records from raw data");
  prep->require_subcommand(1);
  std::string input, output, corpus_path, config_path, checkpoint_path, task_name, case_name;
  std::optional<std::uint64_t> seed;
  std::size_t negatives = kTupleNegatives, count = 24, dim = 32;
  double min_gap = 0.3;
  bool binary = false, instructions = false;

  auto* filter = prep->add_subcommand("filter-pairs", "Drop pairs whose texts overlap too much");
  filter->add_option("--input", input, "Pairs JSONL")->required()->check(CLI::ExistingFile);
  filter->add_option("--output", output, "Filtered pairs JSONL")->required();
  bind(filter, [&] {
    const auto pairs = read_jsonl<PairRecord>(input);
    std::vector<PairRecord> kept;
    for (const auto& p : pairs) {
      if (overlap_filter(p.q, p.p) == FilterDecision::Keep) kept.push_back(p);
    }
    write_file_atomic(output, to_jsonl(kept));
    io.summary(json{{"input", pairs.size()}, {"kept", kept.size()}, {"dropped", pairs.size() - kept.size()}},
               "kept " + std::to_string(kept.size()) + " of " + std::to_string(pairs.size()) + " pairs\n");
  });

  auto* mine = prep->add_subcommand("mine-negatives", "Add BM25 hard negatives to pairs");
  mine->add_option("--input", input, "Pairs JSONL")->required()->check(CLI::ExistingFile);
  mine->add_option("--corpus", corpus_path, "Passage corpus {\"id\",\"text\"}; defaults to the pairs' passages")
      ->check(CLI::ExistingFile);
  mine->add_option("--output", output, "Tuples JSONL")->required();
  mine->add_option("--negatives", negatives, "Negatives per pair")->check(CLI::PositiveNumber);
  mine->add_option("--seed", seed, "Random seed")->required();
  bind(mine, [&] {
    const auto pairs = read_jsonl<PairRecord>(input);
    std::vector<std::string> passages;
    if (!corpus_path.empty()) {
      for (auto& r : read_jsonl<TextRecord>(corpus_path)) passages.push_back(std::move(r.text));
    } else {
      std::set<std::string> seen;
      for (const auto& p : pairs) {
        if (seen.insert(p.p).second) passages.push_back(p.p);
      }
    }
    const Bm25Index index(passages);
    Rng rng(*seed);
    std::vector<TupleRecord> tuples;
    for (const auto& p : pairs) tuples.push_back(mine_hard_negatives(p, index, negatives, rng));
    write_file_atomic(output, to_jsonl(tuples));
    io.summary(json{{"tuples", tuples.size()}, {"negatives", negatives}},
               "wrote " + std::to_string(tuples.size()) + " tuples\n");
  });

  auto* classes = prep->add_subcommand("class-tuples", "Turn labeled texts into classification tuples");
  classes->add_option("--input", input, "Labeled JSONL")->required()->check(CLI::ExistingFile);
  classes->add_option("--output", output, "Tuples JSONL")->required();
  classes->add_option("--seed", seed, "Random seed")->required();
  bind(classes, [&] {
    Rng rng(*seed);
    const auto tuples = build_class_tuples(read_jsonl<LabeledRecord>(input), rng);
    write_file_atomic(output, to_jsonl(tuples));
    io.summary(json{{"tuples", tuples.size()}}, "wrote " + std::to_string(tuples.size()) + " tuples\n");
  });

  auto* quality = prep->add_subcommand("quality-convert", "Turn scored answer threads into retrieval tuples");
  quality->add_option("--input", input, "Threads JSONL")->required()->check(CLI::ExistingFile);
  quality->add_option("--output", output, "Tuples JSONL")->required();
  quality->add_option("--min-gap", min_gap, "Minimum score gap below the best answer for a negative");
  quality->add_option("--seed", seed, "Random seed")->required();
  bind(quality, [&] {
    Rng rng(*seed);
    const auto conv = convert_quality_threads(read_jsonl<QualityThread>(input), rng, min_gap);
    write_file_atomic(output, to_jsonl(conv.tuples));
    io.summary(json{{"tuples", conv.tuples.size()}, {"skipped", conv.skipped}},
               "wrote " + std::to_string(conv.tuples.size()) + " tuples, skipped " + std::to_string(conv.skipped) +
                   " threads\n");
  });

  auto* failures = prep->add_subcommand("gen-failures", "Generate failure-case records (f1, f2, f3)");
  failures->add_option("--case", case_name, "f1, f2 or f3")->required();
  failures->add_option("--count", count, "Number of records")->check(CLI::PositiveNumber);
  failures->add_option("--seed", seed, "Random seed")->required();
  failures->add_option("--output", output, "Failure records JSONL")->required();
  bind(failures, [&] {
    const FailureKind kind = parse_failure_kind(case_name);
    Rng rng(*seed);
    const auto records = gen_failure_case(kind, count, rng);
    write_file_atomic(output, to_jsonl(records));
    io.summary(json{{"records", records.size()}, {"case", to_string(kind)}},
               "wrote " + std::to_string(records.size()) + " " + to_string(kind) + " records\n");
  });

  std::string output_dir;
  auto* toy = prep->add_subcommand("gen-toy", "Write the generated eight-topic data as JSONL files");
  toy->add_option("--seed", seed, "Random seed")->required();
  toy->add_option("--output-dir", output_dir, "Directory for the files")->required();
  bind(toy, [&] {
    Rng rng(*seed);
    ToyData d = make_toy_data(ToyDataSpec{}, rng);
    const std::filesystem::path dir(output_dir);
    std::vector<TextRecord> corpus;
    for (std::size_t i = 0; i < d.corpus.size(); ++i) corpus.push_back({"c" + std::to_string(i), d.corpus[i]});
    std::vector<QrelRecord> qrels;
    for (const auto& [qid, docs] : d.eval_set.qrels) {
      for (const auto& [did, rel] : docs) qrels.push_back({qid, did, rel});
    }
    write_file_atomic(dir / "corpus.jsonl", to_jsonl(corpus));
    write_file_atomic(dir / "pairs.jsonl", to_jsonl(d.pairs));
    write_file_atomic(dir / "labeled.jsonl", to_jsonl(d.labeled));
    write_file_atomic(dir / "labeled_eval.jsonl", to_jsonl(d.labeled_eval));
    write_file_atomic(dir / "scored.jsonl", to_jsonl(d.scored));
    write_file_atomic(dir / "scored_eval.jsonl", to_jsonl(d.scored_eval));
    write_file_atomic(dir / "threads.jsonl", to_jsonl(d.threads));
    write_file_atomic(dir / "eval_queries.jsonl", to_jsonl(d.eval_set.queries));
    write_file_atomic(dir / "eval_corpus.jsonl", to_jsonl(d.eval_set.corpus));
    write_file_atomic(dir / "eval_qrels.jsonl", to_jsonl(qrels));
    io.summary(json{{"output_dir", dir.string()}}, "wrote toy data to " + dir.string() + "\n");
  });

  // training
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
  };
  auto train_summary = [&](const json& logs, const std::string& path, const EncoderModel& model) {
    log_training(logs, err);
    io.summary(json{{"checkpoint", path}, {"stage_completed", model.stage_completed}, {"steps", total_steps(logs)}},
               "trained " + std::to_string(total_steps(logs)) + " steps, wrote " + path + "\n");
  };

  auto* pretrain = app.add_subcommand("pretrain", "Stage I: masked language modelling");
  add_config(pretrain);
  pretrain->add_option("--output", output, "Checkpoint path")->required();
  bind(pretrain, [&] {
    const RunConfig config = RunConfig::load(config_path);
    const PreparedData data = prepare_data(config);
    EncoderModel model = initial_model(config, data);
    const json logs = run_stages(model, config, data, 1);
    save_checkpoint(model, nullptr, output);
    train_summary(logs, output, model);
  });

  auto* pairs = app.add_subcommand("train-pairs", "Stage II: contrastive pair training");
  add_config(pairs);
  pairs->add_option("--checkpoint", checkpoint_path, "Stage I checkpoint; a fresh model when omitted")
      ->check(CLI::ExistingFile);
  pairs->add_option("--output", output, "Checkpoint path")->required();
  bind(pairs, [&] {
    const RunConfig config = RunConfig::load(config_path);
    const PreparedData data = prepare_data(config);
    EncoderModel model = checkpoint_path.empty() ? initial_model(config, data) : load_checkpoint(checkpoint_path);
    const json logs = run_stages(model, config, data, 2);
    save_checkpoint(model, nullptr, output);
    train_summary(logs, output, model);
  });

  auto* adapter = app.add_subcommand("train-adapter", "Stage III: task adapter training on a frozen base");
  add_config(adapter);
  adapter->add_option("--checkpoint", checkpoint_path, "Stage II (or later) checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  adapter->add_option("--task", task_name, "Adapter to train; every stage III plan when omitted");
  adapter->add_option("--output", output, "Checkpoint path")->required();
  bind(adapter, [&] {
    const RunConfig config = RunConfig::load(config_path);
    std::optional<TaskKind> only;
    if (!task_name.empty()) {
      only = parse_task(task_name);
      if (config.find_stage(3, *only) == nullptr) {
        throw std::invalid_argument("the config has no stage III plan for " + task_name);
      }
    }
    const PreparedData data = prepare_data(config);
    EncoderModel model = load_checkpoint(checkpoint_path);
    const json logs = run_stages(model, config, data, 3, only);
    save_checkpoint(model, nullptr, output);
    train_summary(logs, output, model);
  });

  auto* run_cmd = app.add_subcommand("run", "Prepare data, train all stages and evaluate");
  add_config(run_cmd);
  bind(run_cmd, [&] {
    const RunConfig config = RunConfig::load(config_path);
    const PipelineResult result = run_pipeline(config);
    if (verbosity() > 0) {
      std::ifstream in(config.output_dir / "train_log.json");
      const json logs = json::parse(in);
      for (const auto& [stage, entries] : logs.items()) log_training(entries, err);
    }
    if (io.json_mode) {
      out << result.reports.dump() << "\n";
      return;
    }
    for (const auto& r : result.reports["reports"]) {
      std::string line = r["task"].get<std::string>() + "  dim=" + std::to_string(r["dim"].get<std::size_t>());
      for (const auto& [name, value] : r["metrics"].items()) line += "  " + name + "=" + fixed(value.get<double>());
      out << line << "\n";
    }
    if (result.reports.contains("ablation")) {
      std::ifstream in(config.output_dir / "reports" / "ablation.txt");
      out << in.rdbuf();
    }
    out << "outputs in " << config.output_dir.string() << "\n";
  });

  // encode
  auto* encode = app.add_subcommand("encode", "Embed texts with a trained checkpoint");
  encode->add_option("--checkpoint", checkpoint_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  encode->add_option("--task", task_name, "retrieval.query, retrieval.passage, separation, classification, "
                                          "text-matching or none")
      ->required();
  encode->add_option("--dim", dim, "Output dimension (one of the model's MRL dims)")->check(CLI::PositiveNumber);
  encode->add_option("--input", input, "Texts JSONL {\"id\",\"text\"}")->required()->check(CLI::ExistingFile);
  encode->add_option("--output", output, "Output path; stdout when omitted (JSONL only)");
  encode->add_flag("--binary", binary, "Write a binary tensor file instead of JSONL");
  encode->add_flag("--instructions", instructions, "Prefix retrieval texts with \"query: \" or \"passage: \"");
  bind(encode, [&] {
    const TaskKind task = parse_task(task_name);
    if (binary && output.empty()) throw std::invalid_argument("--binary needs --output");
    const EncoderModel model = load_checkpoint(checkpoint_path);
    const auto& dims = model.config().mrl_dims;
    if (std::find(dims.begin(), dims.end(), dim) == dims.end()) {
      throw std::invalid_argument("--dim must be one of the model's MRL dims");
    }
    if (task != TaskKind::None && !model.has_adapter(task)) {
      throw std::invalid_argument("the checkpoint has no " + task_name + " adapter");
    }
    const auto records = read_jsonl<TextRecord>(input);
    const InstructionRole role = !instructions                           ? InstructionRole::None
                                 : task == TaskKind::RetrievalQuery     ? InstructionRole::Query
                                 : task == TaskKind::RetrievalPassage   ? InstructionRole::Passage
                                                                        : InstructionRole::None;
    std::vector<std::string> texts;
    for (const auto& r : records) texts.push_back(with_instruction(r.text, role));
    Tensor vectors = Tensor::zeros({records.size(), dim});
    constexpr std::size_t kChunk = 32;
    for (std::size_t start = 0; start < texts.size(); start += kChunk) {
      const std::size_t n = std::min(kChunk, texts.size() - start);
      const Tensor part = embed(model, std::span(texts).subspan(start, n), task, dim);
      std::copy(part.data().begin(), part.data().end(), vectors.mutable_data().begin() + static_cast<std::ptrdiff_t>(start * dim));
    }
    if (binary) {
      json ids = json::array();
      for (const auto& r : records) ids.push_back(r.id);
      write_file_atomic(output, serialize_tensors({{"embeddings", vectors}},
                                                  json{{"ids", ids}, {"task", to_string(task)}, {"dim", dim}}));
    } else {
      std::string lines;
      for (std::size_t i = 0; i < records.size(); ++i) {
        std::vector<double> v(vectors.data().begin() + static_cast<std::ptrdiff_t>(i * dim),
                              vectors.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
        lines += json{{"id", records[i].id}, {"vec", v}}.dump() + "\n";
      }
      if (output.empty()) {
        out << lines;
        return;
      }
      write_file_atomic(output, lines);
    }
    if (!output.empty()) {
      io.summary(json{{"output", output}, {"count", records.size()}, {"dim", dim}},
                 "wrote " + std::to_string(records.size()) + " embeddings to " + output + "\n");
    }
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->require_subcommand(1);
  std::string queries, eval_corpus, qrels, train_path, test_path;
  std::vector<std::size_t> dims{4, 8, 16, 32};
  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--dim", dim, "Embedding dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Seed recorded in the report; the model's seed when omitted");
  };
  auto add_retrieval_files = [&](CLI::App* cmd) {
    cmd->add_option("--queries", queries, "Queries JSONL {\"id\",\"text\"}")->required()->check(CLI::ExistingFile);
    cmd->add_option("--corpus", eval_corpus, "Documents JSONL {\"id\",\"text\"}")->required()->check(CLI::ExistingFile);
    cmd->add_option("--qrels", qrels, "Relevance JSONL {\"qid\",\"did\",\"rel\"}")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--instructions", instructions, "Use \"query: \" and \"passage: \" prefixes");
  };

  auto* retrieval = eval->add_subcommand("retrieval", "nDCG@10 and mAP on a retrieval set");
  add_model(retrieval);
  add_retrieval_files(retrieval);
  bind(retrieval, [&] {
    const EncoderModel model = load_checkpoint(checkpoint_path);
    const RetrievalSet set = read_retrieval_set(queries, eval_corpus, qrels);
    io.report(evaluate_retrieval(model, set, dim, default_retrieval_setup(model, instructions),
                                 seed_or_model(seed, model)));
  });

  auto* sweep = eval->add_subcommand("mrl-sweep", "Retrieval metrics at several truncation dims");
  add_model(sweep);
  add_retrieval_files(sweep);
  sweep->add_option("--dims", dims, "Dims to evaluate")->delimiter(',');
  bind(sweep, [&] {
    const EncoderModel model = load_checkpoint(checkpoint_path);
    const RetrievalSet set = read_retrieval_set(queries, eval_corpus, qrels);
    const auto reports =
        mrl_sweep(model, set, dims, default_retrieval_setup(model, instructions), seed_or_model(seed, model));
    for (const auto& r : reports) io.report(r);
  });

  auto* sts = eval->add_subcommand("sts", "Spearman correlation on scored pairs");
  add_model(sts);
  sts->add_option("--input", input, "Scored pairs JSONL")->required()->check(CLI::ExistingFile);
  bind(sts, [&] {
    const EncoderModel model = load_checkpoint(checkpoint_path);
    io.report(evaluate_sts(model, read_jsonl<ScoredPairRecord>(input), dim, task_or_base(model, TaskKind::TextMatching),
                           seed_or_model(seed, model)));
  });

  auto* classify = eval->add_subcommand("classification", "Logistic-regression probe accuracy");
  add_model(classify);
  classify->add_option("--train", train_path, "Labeled JSONL for fitting")->required()->check(CLI::ExistingFile);
  classify->add_option("--test", test_path, "Labeled JSONL for scoring")->required()->check(CLI::ExistingFile);
  bind(classify, [&] {
    const EncoderModel model = load_checkpoint(checkpoint_path);
    io.report(evaluate_classification(model, read_jsonl<LabeledRecord>(train_path), read_jsonl<LabeledRecord>(test_path),
                                      dim, task_or_base(model, TaskKind::Classification), seed_or_model(seed, model)));
  });

  auto* cluster = eval->add_subcommand("clustering", "k-means v-measure against gold labels");
  add_model(cluster);
  cluster->add_option("--input", input, "Labeled JSONL")->required()->check(CLI::ExistingFile);
  bind(cluster, [&] {
    const EncoderModel model = load_checkpoint(checkpoint_path);
    io.report(evaluate_clustering(model, read_jsonl<LabeledRecord>(input), dim,
                                  task_or_base(model, TaskKind::Separation), seed_or_model(seed, model)));
  });

  auto* fail = eval->add_subcommand("failures", "Gold-versus-distractor ranking for a failure case");
  add_model(fail);
  fail->add_option("--case", case_name, "f1, f2, f3 or f4")->required();
  fail->add_option("--input", input, "Failure records JSONL, or tuples JSONL for f4")
      ->required()
      ->check(CLI::ExistingFile);
  fail->add_flag("--instructions", instructions, "Use \"query: \" and \"passage: \" prefixes");
  bind(fail, [&] {
    const FailureKind kind = parse_failure_kind(case_name);
    const EncoderModel model = load_checkpoint(checkpoint_path);
    io.report(failure_eval(model, read_failure_input(input, kind), to_string(kind), dim,
                           default_retrieval_setup(model, instructions), seed_or_model(seed, model)));
  });

  auto* ablation = eval->add_subcommand("ablation", "Adapter and instruction grid trained from a stage II model");
  add_config(ablation);
  ablation->add_option("--checkpoint", checkpoint_path, "Stage II checkpoint")->required()->check(CLI::ExistingFile);
  ablation->add_option("--output", output, "Also write the JSON report here");
  bind(ablation, [&] {
    const RunConfig config = RunConfig::load(config_path);
    const PreparedData data = prepare_data(config);
    const EncoderModel model = load_checkpoint(checkpoint_path);
    const AblationReport report = run_ablation(model, config, data);
    if (!output.empty()) write_file_atomic(output, report.to_json().dump(2) + "\n");
    io.summary(report.to_json(), report.render());
  });

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace taskemb::cli
