#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "xcos/model.hpp"

namespace xcos {

// One verification decision together with the maps that explain it.
struct ExplanationRecord {
  std::string pair_id;
  std::string image_a;
  std::string image_b;
  double xcos_value = 0.0;
  std::optional<double> teacher_value;
  Tensor similarity;  // S, (h_F, w_F)
  Tensor attention;   // W, (h_F, w_F)
  AttentionVariant variant = AttentionVariant::unit;
  double threshold = 0.0;
  bool decision = false;

  nlohmann::json to_json() const;
  static ExplanationRecord from_json(const nlohmann::json& j);

  // The stored score must recompute from the stored maps.
  void validate_consistency(double tolerance = 1e-9) const;
};

ExplanationRecord explain_pair(const XcosModel& model, const Tensor& image_a,
                               const Tensor& image_b, AttentionVariant variant,
                               double threshold, const TeacherModel* teacher,
                               const std::string& pair_id, const std::string& name_a,
                               const std::string& name_b);

// Writes <pair_id>.json plus <pair_id>_S.pgm and <pair_id>_W.pgm heatmaps
// (x16 nearest-neighbor upsampling; S mapped linearly from [-1, 1], W from
// [0, max(W)]). Returns the JSON path.
std::filesystem::path export_explanation(const ExplanationRecord& record,
                                         const std::filesystem::path& out_dir);

}  // namespace xcos
