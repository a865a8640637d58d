#include "taskemb/checkpoint.hpp"

#include "taskemb/records.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace taskemb {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},
              {"d_model", c.d_model},
              {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},
              {"d_ff", c.d_ff},
              {"max_seq_len", c.max_seq_len},
              {"rope_base_train", c.rope_base_train},
              {"rope_base_infer", c.rope_base_infer},
              {"lora_rank", c.lora_rank},
              {"lora_alpha", c.lora_alpha},
              {"mrl_dims", c.mrl_dims},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
  ModelConfig c;
  auto take = [&j](const char* key, auto& field) {
    auto it = j.find(key);
    if (it != j.end()) it->get_to(field);
  };
  take("vocab_size", c.vocab_size);
  take("d_model", c.d_model);
  take("n_layers", c.n_layers);
  take("n_heads", c.n_heads);
  take("d_ff", c.d_ff);
  take("max_seq_len", c.max_seq_len);
  take("rope_base_train", c.rope_base_train);
  take("rope_base_infer", c.rope_base_infer);
  take("lora_rank", c.lora_rank);
  take("lora_alpha", c.lora_alpha);
  take("mrl_dims", c.mrl_dims);
  take("seed", c.seed);
  c.validate();
  return c;
}

namespace {

struct Entry {
  std::string name;
  Shape shape;
  std::span<const Scalar> values;
};

std::string pack(const std::vector<Entry>& entries, json metadata) {
  json header = json::object();
  std::size_t offset = 0;
  for (const auto& e : entries) {
    header[e.name] = json{{"shape", e.shape}, {"offset", offset}};
    offset += e.values.size() * sizeof(Scalar);
  }
  header["__metadata__"] = std::move(metadata);
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.push_back(static_cast<char>(kCheckpointVersion));
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += text;
  // Payloads follow in header (sorted-name) order so offsets are increasing.
  std::map<std::string, const Entry*> sorted;
  for (const auto& e : entries) sorted[e.name] = &e;
  std::string payload(offset, '\0');
  for (const auto& [name, e] : sorted) {
    const std::size_t at = header[name]["offset"].get<std::size_t>();
    std::memcpy(payload.data() + at, e->values.data(), e->values.size() * sizeof(Scalar));
  }
  return out + payload;
}

std::size_t numel_of(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

json model_metadata(const EncoderModel& model, const AdamW* optimizer, std::size_t step) {
  std::vector<std::string> tasks;
  for (const auto& [task, adapter] : model.adapters()) tasks.push_back(to_string(task));
  return json{{"config", config_to_json(model.config())},
              {"vocab", model.vocab().words()},
              {"stage_completed", model.stage_completed},
              {"seed", model.config().seed},
              {"step", step},
              {"adapters", tasks},
              {"optimizer_steps", optimizer ? optimizer->steps() : 0}};
}

struct Parsed {
  json header;
  std::string_view payload;
};

Parsed split(const std::string& bytes, const std::string& source) {
  constexpr std::size_t prefix = sizeof(kCheckpointMagic) + 1 + sizeof(std::uint64_t);
  if (bytes.size() < prefix || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw DataError(source + ": not a checkpoint (bad magic)");
  }
  const auto version = static_cast<std::uint8_t>(bytes[sizeof(kCheckpointMagic)]);
  if (version != kCheckpointVersion) {
    throw DataError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + sizeof(kCheckpointMagic) + 1, sizeof(len));
  if (len > bytes.size() - prefix) throw DataError(source + ": truncated header");
  Parsed p;
  try {
    p.header = json::parse(bytes.begin() + prefix, bytes.begin() + static_cast<std::ptrdiff_t>(prefix + len));
  } catch (const json::exception& e) {
    throw DataError(source + ": corrupt header: " + e.what());
  }
  if (!p.header.is_object()) throw DataError(source + ": corrupt header: not an object");
  p.payload = std::string_view(bytes).substr(prefix + len);
  return p;
}

std::vector<Scalar> read_tensor(const Parsed& p, const std::string& name, const Shape& expected,
                                const std::string& source) {
  auto it = p.header.find(name);
  if (it == p.header.end()) throw DataError(source + ": missing tensor " + name);
  Shape shape;
  std::size_t offset = 0;
  try {
    shape = it->at("shape").get<Shape>();
    offset = it->at("offset").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(source + ": corrupt header entry " + name + ": " + e.what());
  }
  if (!expected.empty() && shape != expected) throw DataError(source + ": shape mismatch for " + name);
  const std::size_t bytes = numel_of(shape) * sizeof(Scalar);
  if (offset > p.payload.size() || bytes > p.payload.size() - offset) {
    throw DataError(source + ": truncated payload for " + name);
  }
  std::vector<Scalar> values(numel_of(shape));
  std::memcpy(values.data(), p.payload.data() + offset, bytes);
  return values;
}

Shape shape_of(const Parsed& p, const std::string& name, const std::string& source) {
  try {
    return p.header.at(name).at("shape").get<Shape>();
  } catch (const json::exception& e) {
    throw DataError(source + ": corrupt header entry " + name + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string serialize_checkpoint(const EncoderModel& model, const AdamW* optimizer, std::size_t step) {
  std::vector<Entry> entries;
  for (const auto& [name, t] : model.named_base_parameters()) entries.push_back({name, t.shape(), t.data()});
  for (const auto& [name, t] : model.named_adapter_parameters()) entries.push_back({name, t.shape(), t.data()});
  if (optimizer != nullptr) {
    for (const auto& [name, t] : optimizer->parameters()) {
      auto it = optimizer->state().find(name);
      if (it == optimizer->state().end()) continue;
      entries.push_back({"optim/m/" + name, t.shape(), it->second.m});
      entries.push_back({"optim/v/" + name, t.shape(), it->second.v});
    }
  }
  return pack(entries, model_metadata(model, optimizer, step));
}

std::string serialize_tensors(const std::map<std::string, Tensor>& tensors, const json& metadata) {
  std::vector<Entry> entries;
  for (const auto& [name, t] : tensors) entries.push_back({name, t.shape(), t.data()});
  return pack(entries, metadata);
}

void save_checkpoint(const EncoderModel& model, const AdamW* optimizer, const std::filesystem::path& path,
                     std::size_t step) {
  write_file_atomic(path, serialize_checkpoint(model, optimizer, step));
  const json meta{{"stage_completed", model.stage_completed},
                  {"seed", model.config().seed},
                  {"config", config_to_json(model.config())},
                  {"step", step}};
  write_file_atomic(path.string() + ".meta.json", meta.dump(2) + "\n");
}

Checkpoint parse_checkpoint(const std::string& bytes, const std::string& source) {
  const Parsed p = split(bytes, source);
  auto meta_it = p.header.find("__metadata__");
  if (meta_it == p.header.end()) throw DataError(source + ": corrupt header: no metadata");
  const json& meta = *meta_it;

  ModelConfig config;
  Vocab vocab;
  int stage = 0;
  std::size_t step = 0, optimizer_steps = 0;
  std::vector<std::string> tasks;
  try {
    config = config_from_json(meta.at("config"));
    vocab = Vocab::from_words(meta.at("vocab").get<std::vector<std::string>>());
    stage = meta.at("stage_completed").get<int>();
    step = meta.value("step", std::size_t{0});
    optimizer_steps = meta.value("optimizer_steps", std::size_t{0});
    tasks = meta.value("adapters", std::vector<std::string>{});
  } catch (const std::exception& e) {
    throw DataError(source + ": corrupt metadata: " + e.what());
  }

  EncoderModel model = [&] {
    try {
      return EncoderModel(config, vocab);
    } catch (const std::invalid_argument& e) {
      throw DataError(source + ": inconsistent metadata: " + e.what());
    }
  }();
  for (auto& [name, t] : model.named_base_parameters()) {
    const auto values = read_tensor(p, name, t.shape(), source);
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
  }
  for (const auto& task_name : tasks) {
    TaskKind task;
    try {
      task = parse_task(task_name);
    } catch (const std::invalid_argument& e) {
      throw DataError(source + ": " + e.what());
    }
    LoraAdapter& adapter = model.add_adapter(task);
    for (auto& [key, pair] : adapter.matrices) {
      const std::string prefix = "adapter/" + task_name + "/" + key + "/";
      const auto a = read_tensor(p, prefix + "A", pair.a.shape(), source);
      const auto b = read_tensor(p, prefix + "B", pair.b.shape(), source);
      std::copy(a.begin(), a.end(), pair.a.mutable_data().begin());
      std::copy(b.begin(), b.end(), pair.b.mutable_data().begin());
    }
  }
  model.stage_completed = stage;

  Checkpoint ckpt{std::move(model), {}, optimizer_steps, step};
  constexpr std::string_view m_prefix = "optim/m/";
  for (const auto& [name, entry] : p.header.items()) {
    if (name.rfind(m_prefix, 0) != 0) continue;
    const std::string param = name.substr(m_prefix.size());
    const Shape shape = shape_of(p, name, source);
    Moments mom{read_tensor(p, name, shape, source), read_tensor(p, "optim/v/" + param, shape, source)};
    ckpt.optimizer_moments.emplace(param, std::move(mom));
  }
  return ckpt;
}

Checkpoint load_checkpoint_full(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

EncoderModel load_checkpoint(const std::filesystem::path& path) { return std::move(load_checkpoint_full(path).model); }

}  // namespace taskemb
