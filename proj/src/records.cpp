#include "taskemb/records.hpp"

#include "taskemb/common.hpp"

#include <fstream>
#include <sstream>

namespace taskemb {

using nlohmann::json;

namespace {

const json& required(const json& j, const char* key) {
  if (!j.is_object()) throw std::invalid_argument("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing required key \"") + key + "\"");
  return *it;
}

std::string text_of(const json& j, const char* key) {
  const json& v = required(j, key);
  if (!v.is_string()) throw std::invalid_argument(std::string("key \"") + key + "\" must be a string");
  return v.get<std::string>();
}

std::string optional_text(const json& j, const char* key, std::string fallback = {}) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw std::invalid_argument(std::string("key \"") + key + "\" must be a string");
}

double number_of(const json& j, const char* key) {
  const json& v = required(j, key);
  if (!v.is_number()) throw std::invalid_argument(std::string("key \"") + key + "\" must be a number");
  return v.get<double>();
}

std::vector<std::string> strings_of(const json& j, const char* key) {
  const json& v = required(j, key);
  if (!v.is_array()) throw std::invalid_argument(std::string("key \"") + key + "\" must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw std::invalid_argument(std::string("key \"") + key + "\" must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

void from_json(const json& j, PairRecord& r) {
  r.q = text_of(j, "q");
  r.p = text_of(j, "p");
  r.dataset = optional_text(j, "dataset", "default");
  if (r.q.empty() || r.p.empty()) throw std::invalid_argument("pair texts must be non-empty");
}

void from_json(const json& j, TupleRecord& r) {
  r.q = text_of(j, "q");
  r.p = text_of(j, "p");
  r.negatives = strings_of(j, "negs");
  r.dataset = optional_text(j, "dataset", "default");
}

void from_json(const json& j, ScoredPairRecord& r) {
  r.q = text_of(j, "q");
  r.p = text_of(j, "p");
  r.score = number_of(j, "score");
  r.scale_max = number_of(j, "scale_max");
  r.dataset = optional_text(j, "dataset", "default");
  if (!(r.scale_max > 0.0) || r.score < 0.0 || r.score > r.scale_max) {
    throw std::invalid_argument("score must lie in [0, scale_max] with scale_max > 0");
  }
}

void from_json(const json& j, LabeledRecord& r) {
  r.text = text_of(j, "text");
  const json& label = required(j, "label");
  if (label.is_string()) {
    r.label = label.get<std::string>();
  } else if (label.is_number_integer()) {
    r.label = std::to_string(label.get<long long>());
  } else {
    throw std::invalid_argument("label must be a string or an integer");
  }
  if (r.label.empty()) throw std::invalid_argument("label must be non-empty");
  r.dataset = optional_text(j, "dataset", "default");
}

void from_json(const json& j, QualityThread& r) {
  r.query = text_of(j, "query");
  const json& answers = required(j, "answers");
  if (!answers.is_array()) throw std::invalid_argument("\"answers\" must be an array");
  r.answers.clear();
  for (const auto& a : answers) {
    QualityAnswer qa{text_of(a, "text"), number_of(a, "score")};
    if (qa.score < 0.0 || qa.score > 1.0) throw std::invalid_argument("answer scores must lie in [0, 1]");
    r.answers.push_back(std::move(qa));
  }
}

void from_json(const json& j, FailureRecord& r) {
  r.kind = optional_text(j, "kind");
  r.query = text_of(j, "query");
  r.gold = text_of(j, "gold");
  r.distractors = strings_of(j, "distractors");
}

void from_json(const json& j, TextRecord& r) {
  r.id = optional_text(j, "id");
  r.text = text_of(j, "text");
}

void from_json(const json& j, QrelRecord& r) {
  r.qid = optional_text(j, "qid");
  r.did = optional_text(j, "did");
  if (r.qid.empty() || r.did.empty()) throw std::invalid_argument("qrels need \"qid\" and \"did\"");
  r.rel = number_of(j, "rel");
  if (r.rel < 0.0) throw std::invalid_argument("relevance must be non-negative");
}

void to_json(json& j, const PairRecord& r) { j = json{{"q", r.q}, {"p", r.p}, {"dataset", r.dataset}}; }
void to_json(json& j, const TupleRecord& r) {
  j = json{{"q", r.q}, {"p", r.p}, {"negs", r.negatives}, {"dataset", r.dataset}};
}
void to_json(json& j, const ScoredPairRecord& r) {
  j = json{{"q", r.q}, {"p", r.p}, {"score", r.score}, {"scale_max", r.scale_max}, {"dataset", r.dataset}};
}
void to_json(json& j, const LabeledRecord& r) { j = json{{"text", r.text}, {"label", r.label}, {"dataset", r.dataset}}; }
void to_json(json& j, const QualityThread& r) {
  json answers = json::array();
  for (const auto& a : r.answers) answers.push_back({{"text", a.text}, {"score", a.score}});
  j = json{{"query", r.query}, {"answers", std::move(answers)}};
}
void to_json(json& j, const FailureRecord& r) {
  j = json{{"kind", r.kind}, {"query", r.query}, {"gold", r.gold}, {"distractors", r.distractors}};
}
void to_json(json& j, const TextRecord& r) { j = json{{"id", r.id}, {"text", r.text}}; }
void to_json(json& j, const QrelRecord& r) { j = json{{"qid", r.qid}, {"did", r.did}, {"rel", r.rel}}; }

template <typename Record>
std::vector<Record> parse_jsonl(std::istream& in, const std::string& source) {
  std::vector<Record> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<Record>());
    } catch (const std::exception& e) {
      throw DataError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

template <typename Record>
std::vector<Record> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_jsonl<Record>(in, path.string());
}

template <typename Record>
std::string to_jsonl(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) {
    out += json(r).dump();
    out.push_back('\n');
  }
  return out;
}

#define TASKEMB_INSTANTIATE(R)                                                       \
  template std::vector<R> parse_jsonl<R>(std::istream&, const std::string&);         \
  template std::vector<R> read_jsonl<R>(const std::filesystem::path&);               \
  template std::string to_jsonl<R>(const std::vector<R>&);

TASKEMB_INSTANTIATE(PairRecord)
TASKEMB_INSTANTIATE(TupleRecord)
TASKEMB_INSTANTIATE(ScoredPairRecord)
TASKEMB_INSTANTIATE(LabeledRecord)
TASKEMB_INSTANTIATE(QualityThread)
TASKEMB_INSTANTIATE(FailureRecord)
TASKEMB_INSTANTIATE(TextRecord)
TASKEMB_INSTANTIATE(QrelRecord)

#undef TASKEMB_INSTANTIATE

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Qrels make_qrels(const std::vector<QrelRecord>& rows) {
  Qrels q;
  for (const auto& r : rows) q[r.qid][r.did] = r.rel;
  return q;
}

}  // namespace taskemb
