#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "xcos/data.hpp"
#include "xcos/losses.hpp"
#include "xcos/model.hpp"

namespace xcos {

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double mean_l_id = 0.0;
  double mean_l_cos = 0.0;
  double wall_seconds = 0.0;
};

// Appends one row per epoch; writes the header when creating the file.
void append_metrics_csv(const std::filesystem::path& path, const EpochMetrics& metrics);

// Rejects datasets that cannot support identity training: fewer than two
// identities, or any identity with fewer than two images.
void validate_training_dataset(const Dataset& data, const std::vector<int>& indices);

// Trains the reference verification model with the margin softmax loss on
// its global embedding. Deterministic under cfg.rng_seed.
TeacherModel train_teacher(const Dataset& data, const std::vector<int>& train_indices,
                           const TeacherConfig& teacher_cfg, const TrainConfig& cfg,
                           const MarginConfig& margin,
                           std::vector<EpochMetrics>* history = nullptr,
                           const std::filesystem::path* csv_log = nullptr);

// One two-branch epoch: identity batches through the margin loss on the
// flattened grid features, pair batches regressing the attention-weighted
// score to the frozen teacher's cosine. Updates model parameters in place.
EpochMetrics train_xcos_epoch(XcosModel& model, const Dataset& data,
                              const std::vector<int>& train_indices,
                              const TeacherModel& teacher, const TrainConfig& cfg,
                              const MarginConfig& margin, int epoch, Rng& rng);

// Full schedule over cfg.total_epochs.
std::vector<EpochMetrics> train_xcos(XcosModel& model, const Dataset& data,
                                     const std::vector<int>& train_indices,
                                     const TeacherModel& teacher, const TrainConfig& cfg,
                                     const MarginConfig& margin,
                                     const std::filesystem::path* csv_log = nullptr);

// Normalized image cache indexed like the dataset.
std::vector<Tensor> normalized_images(const Dataset& data);

// Per-identity holdout: the last eval_per_identity images of each identity
// go to eval, the rest to train.
struct SplitIndices {
  std::vector<int> train;
  std::vector<int> eval;
};
SplitIndices split_by_identity(const Dataset& data, int eval_per_identity);

// Calibration samples from a pair list: grid features from the model,
// reference scores from the teacher.
std::vector<CalibrationSample> collect_calibration_samples(const XcosModel& model,
                                                           const TeacherModel& teacher,
                                                           const std::vector<Tensor>& images,
                                                           const std::vector<PairRecord>& pairs);

}  // namespace xcos
