#pragma once

#include <optional>

#include "xcos/attention.hpp"
#include "xcos/backbone.hpp"
#include "xcos/metric.hpp"

namespace xcos {

struct TeacherConfig {
  BackboneConfig trunk;  // stride-2 blocks only; the grid head is unused
  int embed_dim = 256;

  void validate() const;
};

// Reference verification model: conv trunk, flatten, linear head to a global
// embedding. Scores are cosines of embeddings.
class TeacherModel {
 public:
  TeacherModel() = default;
  TeacherModel(const TeacherConfig& cfg, uint64_t seed);

  const TeacherConfig& config() const { return cfg_; }

  Tensor embed(const Tensor& image) const;
  Graph::NodeId embed_node(Graph& g, const Tensor& image);

  std::vector<NamedParam> named_params();
  const ConvStack& trunk() const { return trunk_; }

 private:
  TeacherConfig cfg_;
  ConvStack trunk_;
  Parameter fc_weight_;  // (embed_dim, trunk_out * 7 * 7)
  Parameter fc_bias_;
};

// Global cosine similarity under the teacher; symmetric in its arguments.
double teacher_score(const TeacherModel& teacher, const Tensor& a, const Tensor& b);

// The verification model: grid backbone, pair-conditioned attention, and the
// training-time identity classifier, plus an optional calibration table for
// the correlated attention variant.
class XcosModel {
 public:
  XcosModel() = default;
  XcosModel(const BackboneConfig& cfg, int num_classes, uint64_t seed);

  GridBackbone& backbone() { return backbone_; }
  const GridBackbone& backbone() const { return backbone_; }
  AttentionNet& attention() { return attention_; }
  const AttentionNet& attention() const { return attention_; }
  ClassWeights& classifier() { return classifier_; }
  std::optional<CalibrationTable>& calibration() { return calibration_; }
  const std::optional<CalibrationTable>& calibration() const { return calibration_; }

  int num_classes() const { return classifier_.rows.value.extent(0); }

  // Full scoring path for one image pair under the chosen attention variant.
  XcosScore score(const Tensor& image_a, const Tensor& image_b, AttentionVariant variant) const;

  // Copies teacher trunk weights into the backbone trunk (shapes must match).
  void init_trunk_from(const TeacherModel& teacher);

  std::vector<NamedParam> named_params();

 private:
  GridBackbone backbone_;
  AttentionNet attention_;
  ClassWeights classifier_;
  std::optional<CalibrationTable> calibration_;
};

}  // namespace xcos
