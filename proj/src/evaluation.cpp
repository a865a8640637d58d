#include "taskemb/evaluation.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace taskemb {

using nlohmann::json;

json EvalReport::to_json() const {
  return json{{"run_id", run_id}, {"task", task},         {"adapters", adapters},   {"instructions", instructions},
              {"dim", dim},       {"metrics", metrics},   {"seed", seed},           {"timestamp", timestamp}};
}

std::string report_timestamp() {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env != nullptr && *env != '\0') {
    try {
      t = static_cast<std::time_t>(std::stoll(env));
    } catch (const std::exception&) {
      throw std::invalid_argument("SOURCE_DATE_EPOCH must be an integer");
    }
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

namespace {

constexpr std::size_t kEmbedChunk = 32;

RowMatrix embed_all(const EncoderModel& model, const std::vector<std::string>& texts, TaskKind task, std::size_t dim,
                    InstructionRole role) {
  RowMatrix out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t start = 0; start < texts.size(); start += kEmbedChunk) {
    const std::size_t end = std::min(texts.size(), start + kEmbedChunk);
    std::vector<std::string> chunk;
    for (std::size_t i = start; i < end; ++i) chunk.push_back(with_instruction(texts[i], role));
    const Tensor e = embed(model, chunk, task, dim);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) = e.matrix();
  }
  return out;
}

InstructionRole query_role(const EncodingSetup& s) { return s.instructions ? InstructionRole::Query : InstructionRole::None; }
InstructionRole doc_role(const EncodingSetup& s) { return s.instructions ? InstructionRole::Passage : InstructionRole::None; }

std::vector<std::string> adapter_names(const EncodingSetup& s) {
  std::vector<std::string> names{to_string(s.query_task)};
  if (s.doc_task != s.query_task) names.push_back(to_string(s.doc_task));
  return names;
}

EvalReport base_report(const std::string& task, std::size_t dim, std::uint64_t seed) {
  EvalReport r;
  r.run_id = "taskemb-" + std::to_string(seed);
  r.task = task;
  r.dim = dim;
  r.seed = seed;
  r.timestamp = report_timestamp();
  return r;
}

std::vector<std::string> texts_of(const std::vector<TextRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records) out.push_back(r.text);
  return out;
}

}  // namespace

std::map<std::string, std::vector<std::string>> rank_documents(const EncoderModel& model, const RetrievalSet& set,
                                                               std::size_t dim, const EncodingSetup& setup) {
  if (set.queries.empty() || set.corpus.empty()) throw std::invalid_argument("retrieval set needs queries and documents");
  const RowMatrix q = embed_all(model, texts_of(set.queries), setup.query_task, dim, query_role(setup));
  const RowMatrix d = embed_all(model, texts_of(set.corpus), setup.doc_task, dim, doc_role(setup));
  const RowMatrix scores = q * d.transpose();
  std::map<std::string, std::vector<std::string>> rankings;
  for (std::size_t i = 0; i < set.queries.size(); ++i) {
    std::vector<std::size_t> order(set.corpus.size());
    std::iota(order.begin(), order.end(), 0);
    const auto row = static_cast<Eigen::Index>(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double sa = scores(row, static_cast<Eigen::Index>(a)), sb = scores(row, static_cast<Eigen::Index>(b));
      if (sa != sb) return sa > sb;
      return set.corpus[a].id < set.corpus[b].id;
    });
    auto& ranking = rankings[set.queries[i].id];
    for (std::size_t j : order) ranking.push_back(set.corpus[j].id);
  }
  return rankings;
}

EvalReport evaluate_retrieval(const EncoderModel& model, const RetrievalSet& set, std::size_t dim,
                              const EncodingSetup& setup, std::uint64_t seed) {
  const auto rankings = rank_documents(model, set, dim, setup);
  const MeanMetric ndcg = mean_ndcg_at_k(rankings, set.qrels, 10);
  const MeanMetric map = mean_average_precision(rankings, set.qrels);
  EvalReport r = base_report("retrieval", dim, seed);
  r.adapters = adapter_names(setup);
  r.instructions = setup.instructions;
  r.metrics = {{"ndcg@10", ndcg.mean},
               {"map", map.mean},
               {"queries", static_cast<double>(ndcg.evaluated)},
               {"excluded_queries", static_cast<double>(ndcg.excluded)}};
  return r;
}

EvalReport evaluate_sts(const EncoderModel& model, const std::vector<ScoredPairRecord>& pairs, std::size_t dim,
                        TaskKind task, std::uint64_t seed) {
  std::vector<std::string> qs, ps;
  std::vector<double> gold;
  for (const auto& p : pairs) {
    qs.push_back(p.q);
    ps.push_back(p.p);
    gold.push_back(p.zeta());
  }
  const RowMatrix a = embed_all(model, qs, task, dim, InstructionRole::None);
  const RowMatrix b = embed_all(model, ps, task, dim, InstructionRole::None);
  const Eigen::VectorXd cos = a.cwiseProduct(b).rowwise().sum();
  std::vector<double> predicted(cos.data(), cos.data() + cos.size());
  EvalReport r = base_report("sts", dim, seed);
  r.adapters = {to_string(task)};
  r.metrics = {{"spearman", spearman(predicted, gold)}, {"pairs", static_cast<double>(pairs.size())}};
  return r;
}

EvalReport evaluate_classification(const EncoderModel& model, const std::vector<LabeledRecord>& train,
                                   const std::vector<LabeledRecord>& test, std::size_t dim, TaskKind task,
                                   std::uint64_t seed) {
  std::vector<std::string> train_text, train_label, test_text, test_label;
  for (const auto& r : train) {
    train_text.push_back(r.text);
    train_label.push_back(r.label);
  }
  for (const auto& r : test) {
    test_text.push_back(r.text);
    test_label.push_back(r.label);
  }
  std::map<std::string, int> index;
  const auto ytrain = encode_labels(train_label, index);
  const auto ytest = encode_labels(test_label, index);
  const ProbeResult probe = logistic_probe(embed_all(model, train_text, task, dim, InstructionRole::None), ytrain,
                                           embed_all(model, test_text, task, dim, InstructionRole::None), ytest);
  EvalReport r = base_report("classification", dim, seed);
  r.adapters = {to_string(task)};
  r.metrics = {{"accuracy", probe.accuracy}, {"unseen_label_rows", static_cast<double>(probe.unseen_label_rows)}};
  return r;
}

EvalReport evaluate_clustering(const EncoderModel& model, const std::vector<LabeledRecord>& records, std::size_t dim,
                               TaskKind task, std::uint64_t seed) {
  std::vector<std::string> texts, labels;
  for (const auto& r : records) {
    texts.push_back(r.text);
    labels.push_back(r.label);
  }
  std::map<std::string, int> index;
  const auto gold = encode_labels(labels, index);
  const auto predicted = kmeans(embed_all(model, texts, task, dim, InstructionRole::None), index.size(), seed);
  const VMeasure v = v_measure(predicted, gold);
  EvalReport r = base_report("clustering", dim, seed);
  r.adapters = {to_string(task)};
  r.metrics = {{"v_measure", v.v}, {"homogeneity", v.homogeneity}, {"completeness", v.completeness}};
  return r;
}

std::vector<EvalReport> mrl_sweep(const EncoderModel& model, const RetrievalSet& set, std::span<const std::size_t> dims,
                                  const EncodingSetup& setup, std::uint64_t seed) {
  if (dims.empty()) throw std::invalid_argument("mrl_sweep: no dims given");
  std::vector<EvalReport> reports;
  for (std::size_t dim : dims) reports.push_back(evaluate_retrieval(model, set, dim, setup, seed));
  const auto smallest = std::min_element(dims.begin(), dims.end()) - dims.begin();
  const double base_ndcg = reports[static_cast<std::size_t>(smallest)].metrics.at("ndcg@10");
  const double base_map = reports[static_cast<std::size_t>(smallest)].metrics.at("map");
  for (auto& r : reports) {
    r.task = "mrl-sweep";
    r.metrics["delta_ndcg@10"] = r.metrics.at("ndcg@10") - base_ndcg;
    r.metrics["delta_map"] = r.metrics.at("map") - base_map;
  }
  return reports;
}

json AblationReport::to_json() const {
  json out = json::object();
  json jc = json::array();
  for (const auto& c : cells) {
    jc.push_back({{"adapters", c.two_adapters ? 2 : 1},
                  {"instructions", c.instructions},
                  {"scores", c.scores},
                  {"average", c.average}});
  }
  out["cells"] = std::move(jc);
  out["averages"] = {{"one_adapter", one_adapter_average},
                     {"two_adapters", two_adapter_average},
                     {"without_instructions", without_instructions_average},
                     {"with_instructions", with_instructions_average}};
  out["two_adapters_at_least_one"] = two_adapter_average >= one_adapter_average;
  return out;
}

std::string AblationReport::render() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(16) << "set";
  for (const auto& c : cells) {
    out << std::right << std::setw(14)
        << (std::string(c.two_adapters ? "2ad" : "1ad") + (c.instructions ? "+instr" : "-instr"));
  }
  out << "\n";
  if (!cells.empty()) {
    for (const auto& [name, score] : cells.front().scores) {
      out << std::left << std::setw(16) << name;
      for (const auto& c : cells) out << std::right << std::setw(14) << c.scores.at(name);
      out << "\n";
    }
  }
  out << std::left << std::setw(16) << "average";
  for (const auto& c : cells) out << std::right << std::setw(14) << c.average;
  out << "\n";
  return out.str();
}

AblationReport adapter_ablation(std::span<const AblationVariant> variants, std::span<const RetrievalSet> sets,
                                std::size_t dim) {
  if (sets.empty()) throw std::invalid_argument("adapter_ablation: no retrieval sets");
  AblationReport report;
  for (bool two : {false, true}) {
    for (bool instr : {false, true}) {
      const AblationVariant* v = nullptr;
      for (const auto& cand : variants) {
        if (cand.two_adapters == two && cand.instructions == instr && cand.model != nullptr) v = &cand;
      }
      if (v == nullptr) {
        throw std::invalid_argument(std::string("adapter_ablation: missing variant ") + (two ? "2" : "1") +
                                    " adapter(s), instructions " + (instr ? "on" : "off"));
      }
      EncodingSetup setup{TaskKind::RetrievalQuery, two ? TaskKind::RetrievalPassage : TaskKind::RetrievalQuery, instr};
      AblationReport::Cell cell{two, instr, {}, 0.0};
      for (const auto& set : sets) {
        cell.scores[set.name] = evaluate_retrieval(*v->model, set, dim, setup).metrics.at("ndcg@10");
        cell.average += cell.scores[set.name];
      }
      cell.average /= static_cast<double>(sets.size());
      report.cells.push_back(std::move(cell));
    }
  }
  const auto& c = report.cells;
  report.one_adapter_average = (c[0].average + c[1].average) / 2.0;
  report.two_adapter_average = (c[2].average + c[3].average) / 2.0;
  report.without_instructions_average = (c[0].average + c[2].average) / 2.0;
  report.with_instructions_average = (c[1].average + c[3].average) / 2.0;
  return report;
}

EvalReport failure_eval(const EncoderModel& model, const std::vector<FailureRecord>& records, const std::string& kind,
                        std::size_t dim, const EncodingSetup& setup, std::uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("failure_eval: no records");
  std::vector<std::string> queries;
  std::vector<std::string> docs;
  for (const auto& r : records) {
    if (r.query.empty() || r.gold.empty() || r.distractors.empty()) {
      throw std::invalid_argument("failure_eval: malformed record for query '" + r.query + "'");
    }
    queries.push_back(r.query);
    // Distractors first so that a stable sort ranks tied gold documents last.
    docs.insert(docs.end(), r.distractors.begin(), r.distractors.end());
    docs.push_back(r.gold);
  }
  const RowMatrix q = embed_all(model, queries, setup.query_task, dim, query_role(setup));
  const RowMatrix d = embed_all(model, docs, setup.doc_task, dim, doc_role(setup));
  double map_total = 0.0, ndcg_total = 0.0;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::size_t n = records[i].distractors.size() + 1;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(n);
    for (std::size_t j = 0; j < n; ++j) {
      score[j] = q.row(static_cast<Eigen::Index>(i)).dot(d.row(static_cast<Eigen::Index>(offset + j)));
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    std::vector<std::string> ranking;
    for (std::size_t j : order) ranking.push_back(j + 1 == n ? "gold" : "d" + std::to_string(j));
    map_total += *average_precision(ranking, {"gold"});
    ndcg_total += *ndcg_at_k(ranking, {{"gold", 1.0}}, 10);
    offset += n;
  }
  EvalReport r = base_report("failures/" + kind, dim, seed);
  r.adapters = adapter_names(setup);
  r.instructions = setup.instructions;
  const double count = static_cast<double>(records.size());
  r.metrics = {{"map", map_total / count}, {"ndcg@10", ndcg_total / count}, {"queries", count}};
  return r;
}

}  // namespace taskemb
