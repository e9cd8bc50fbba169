#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xcos/data.hpp"
#include "xcos/model.hpp"

namespace xcos {

struct ScoredPair {
  double score = 0.0;
  bool label = false;
  int index_a = -1;
  int index_b = -1;
};

struct EvalReport {
  std::string variant;
  double accuracy = 0.0;
  std::vector<double> fold_thresholds;
  std::vector<double> fold_accuracies;
  int positive_pairs = 0;
  int negative_pairs = 0;

  nlohmann::json to_json() const;
  std::string table() const;  // aligned plain-text rendering
};

// Seeded round-robin fold assignment; every fold nonempty when count >= k.
std::vector<int> fold_assignment(int count, int k_folds, Rng& rng);

// K-fold accuracy with the decision threshold swept per fold over the
// training folds' score midpoints (plus below-min and at-max sentinels,
// covering the all-accept and all-reject decisions). Ties resolve to the
// smallest maximizing threshold; decisions use strict score > threshold.
EvalReport best_threshold_accuracy(const std::vector<ScoredPair>& scored, int k_folds, Rng& rng,
                                   const std::string& variant = "");

// Same, but with a caller-fixed fold assignment for controlled comparisons.
EvalReport best_threshold_accuracy_with_folds(const std::vector<ScoredPair>& scored,
                                              const std::vector<int>& folds, int k_folds,
                                              const std::string& variant);

// Pearson correlation; rejects constant inputs, where it is undefined.
double pearson_r(std::span<const double> a, std::span<const double> b);

std::vector<ScoredPair> score_pairs_xcos(const XcosModel& model,
                                         const std::vector<Tensor>& images,
                                         const std::vector<PairRecord>& pairs,
                                         AttentionVariant variant);

std::vector<ScoredPair> score_pairs_teacher(const TeacherModel& teacher,
                                            const std::vector<Tensor>& images,
                                            const std::vector<PairRecord>& pairs);

struct OcclusionPoint {
  double coverage = 0.0;
  double xcos_accuracy = 0.0;
  double teacher_accuracy = 0.0;
};

// For each coverage: one fresh mask per distinct image (coverage 0 skips the
// masking stage entirely), both models scored on the identical masked pairs,
// accuracy via the k-fold threshold sweep on shared folds.
std::vector<OcclusionPoint> occlusion_sweep(const XcosModel& model, const TeacherModel& teacher,
                                            const std::vector<Tensor>& images,
                                            const std::vector<PairRecord>& pairs,
                                            const std::vector<double>& coverages,
                                            AttentionVariant variant, int k_folds, Rng& rng);

struct MaskedGridStats {
  double mean_masked_similarity = 0.0;
  double mean_clear_similarity = 0.0;
  long masked_grids = 0;
  long clear_grids = 0;
};

// Classifies grid cells of masked positive pairs by how much of their image
// patch is occluded (in either image) and averages the local similarities.
MaskedGridStats masked_grid_similarity(const XcosModel& model,
                                       const std::vector<Tensor>& images,
                                       const std::vector<PairRecord>& positive_pairs,
                                       double coverage, Rng& rng);

// Unit / correlated / learned reports on identical pairs and folds. The
// calibration must come from pairs disjoint with the evaluation pairs.
std::vector<EvalReport> ablation_run(const XcosModel& model,
                                     const std::vector<Tensor>& images,
                                     const std::vector<PairRecord>& eval_pairs,
                                     const std::vector<PairRecord>& calibration_pairs,
                                     int k_folds, Rng& rng);

}  // namespace xcos
