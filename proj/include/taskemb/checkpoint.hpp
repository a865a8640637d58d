#pragma once

#include "taskemb/encoder.hpp"
#include "taskemb/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace taskemb {

nlohmann::json config_to_json(const ModelConfig& config);
/// Missing keys keep their defaults; the result is validated.
ModelConfig config_from_json(const nlohmann::json& j);

struct Checkpoint {
  EncoderModel model;
  std::map<std::string, Moments> optimizer_moments;  ///< empty when saved without optimizer state
  std::size_t optimizer_steps = 0;
  std::size_t step = 0;
};

inline constexpr char kCheckpointMagic[4] = {'T', 'E', 'M', 'B'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Binary layout: magic, version byte, little-endian u64 header length, JSON
/// header {name: {shape, offset}, "__metadata__": {...}}, then float64 LE
/// payloads. Also writes `<path>.meta.json`. Both files are replaced
/// atomically.
void save_checkpoint(const EncoderModel& model, const AdamW* optimizer, const std::filesystem::path& path,
                     std::size_t step = 0);

/// Serialized bytes of a checkpoint, as written by save_checkpoint.
std::string serialize_checkpoint(const EncoderModel& model, const AdamW* optimizer, std::size_t step = 0);

/// Throws DataError on bad magic, unknown version, corrupt header or
/// truncated payload; nothing partial is returned.
Checkpoint load_checkpoint_full(const std::filesystem::path& path);
Checkpoint parse_checkpoint(const std::string& bytes, const std::string& source);
EncoderModel load_checkpoint(const std::filesystem::path& path);

/// Named float64 tensors in the checkpoint container, without model metadata
/// (used for bulk embedding output).
std::string serialize_tensors(const std::map<std::string, Tensor>& tensors, const nlohmann::json& metadata);

}  // namespace taskemb
