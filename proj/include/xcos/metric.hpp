#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xcos/backbone.hpp"
#include "xcos/tensor.hpp"

namespace xcos {

enum class AttentionVariant { unit, correlated, learned };

std::string to_string(AttentionVariant v);
AttentionVariant attention_variant_from_string(const std::string& name);

// Per-grid cosine similarities of two grid features.
struct PatchedCosineMap {
  Tensor values;  // (h_F, w_F), entries in [-1, 1]
};

// Per-grid weights combining a cosine map into one score.
struct AttentionMap {
  AttentionVariant variant = AttentionVariant::unit;
  Tensor values;  // (h_F, w_F)
};

// Weighted-sum verification score together with the maps that produced it.
struct XcosScore {
  double value = 0.0;
  PatchedCosineMap similarity;
  AttentionMap attention;
};

PatchedCosineMap patched_cosine_map(const GridFeature& fa, const GridFeature& fb);

// Every entry 1/(h*w); weights sum to one.
AttentionMap unit_attention(int height, int width);

// value = sum_ij W[i,j] * S[i,j].
XcosScore xcos(const PatchedCosineMap& s, const AttentionMap& w);

// Same-identity decision; strictly greater than the threshold.
bool verify(const XcosScore& score, double threshold);

// One calibration observation: a pair of grid features and the reference
// model's global cosine for the same image pair.
struct CalibrationSample {
  GridFeature grid_a;
  GridFeature grid_b;
  double teacher_score = 0.0;
};

// Per-grid Pearson correlation between local cosines and the reference
// cosine over a pair set. Zero-variance grids get weight 0.
struct CalibrationTable {
  Tensor correlations;  // (h_F, w_F), entries in [-1, 1]
  int pair_count = 0;
  std::string teacher_id;
  // Dataset indices of the pairs behind the table, kept so evaluations can
  // refuse pair sets that overlap the calibration set.
  std::vector<std::pair<int, int>> pair_indices;

  // As an attention map; optionally clip negatives to zero and renormalize
  // to sum 1 (for display); raw correlations otherwise.
  AttentionMap attention(bool clip_negative_renormalize = false) const;

  nlohmann::json to_json() const;
  static CalibrationTable from_json(const nlohmann::json& j);
};

CalibrationTable correlated_attention(const std::vector<CalibrationSample>& samples,
                                      const std::string& teacher_id = "");

}  // namespace xcos
