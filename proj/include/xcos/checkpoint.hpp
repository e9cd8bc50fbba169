#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xcos/losses.hpp"
#include "xcos/model.hpp"

namespace xcos {

// Serialized model: a config snapshot plus ordered named parameter tensors.
// Binary layout: magic "XCOS", u32 LE version, u32-length-prefixed UTF-8
// JSON config, then per parameter: u32 name length, name, u32 rank, u32
// extents, entries as little-endian IEEE f64. Parameters run to end of file.
struct ModelState {
  nlohmann::json config;
  std::vector<std::pair<std::string, Tensor>> params;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

// Config codecs (the checkpoint JSON mirrors the typed configs).
nlohmann::json to_json(const BackboneConfig& cfg);
BackboneConfig backbone_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MarginConfig& cfg);
MarginConfig margin_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TeacherConfig& cfg);
TeacherConfig teacher_config_from_json(const nlohmann::json& j);

// FNV-1a over the parameter bytes, as a short provenance id.
std::string parameter_fingerprint(const std::vector<NamedParam>& params);

// Model <-> state converters. Loading rebuilds the model from the config
// and rejects parameters whose shapes disagree with it.
ModelState xcos_model_state(XcosModel& model, const MarginConfig& margin,
                            const TrainConfig& train);
XcosModel xcos_model_from_state(const ModelState& state, MarginConfig* margin_out = nullptr,
                                TrainConfig* train_out = nullptr);

ModelState teacher_state(TeacherModel& teacher, const TrainConfig& train,
                         const MarginConfig& margin);
TeacherModel teacher_from_state(const ModelState& state);

}  // namespace xcos
