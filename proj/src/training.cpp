#include "xcos/training.hpp"

#include <chrono>
#include <fstream>
#include <map>

namespace xcos {

using detail::check;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void shuffle_indices(std::vector<int>& indices, Rng& rng) {
  for (size_t i = 0; i + 1 < indices.size(); ++i) {
    const size_t j = i + static_cast<size_t>(rng.next_below(indices.size() - i));
    std::swap(indices[i], indices[j]);
  }
}

}  // namespace

void append_metrics_csv(const std::filesystem::path& path, const EpochMetrics& metrics) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  check(out.good(), "cannot open metrics log " + path.string());
  if (fresh) out << "epoch,lr,mean_L_id,mean_L_cos,wall_seconds\n";
  out << metrics.epoch << "," << metrics.lr << "," << metrics.mean_l_id << ","
      << metrics.mean_l_cos << "," << metrics.wall_seconds << "\n";
}

void validate_training_dataset(const Dataset& data, const std::vector<int>& indices) {
  std::map<int, int> counts;
  for (int idx : indices) {
    check(idx >= 0 && idx < static_cast<int>(data.images.size()),
          "training index " + std::to_string(idx) + " out of dataset range");
    ++counts[data.images[static_cast<size_t>(idx)].identity_id];
  }
  check(counts.size() >= 2, "training needs at least 2 identities, got " +
                                std::to_string(counts.size()));
  for (const auto& [identity, count] : counts) {
    check(count >= 2, "identity " + std::to_string(identity) + " has only " +
                          std::to_string(count) + " images; at least 2 are required");
  }
}

std::vector<Tensor> normalized_images(const Dataset& data) {
  std::vector<Tensor> out;
  out.reserve(data.images.size());
  for (const ImageRecord& img : data.images) out.push_back(normalize(img));
  return out;
}

SplitIndices split_by_identity(const Dataset& data, int eval_per_identity) {
  check(eval_per_identity >= 0, "eval_per_identity must be nonnegative");
  SplitIndices split;
  std::map<int, std::vector<int>> groups;
  for (size_t i = 0; i < data.images.size(); ++i) {
    groups[data.images[i].identity_id].push_back(static_cast<int>(i));
  }
  for (auto& [identity, members] : groups) {
    const int n = static_cast<int>(members.size());
    check(eval_per_identity < n, "identity " + std::to_string(identity) + " has " +
                                     std::to_string(n) +
                                     " images, cannot hold out " +
                                     std::to_string(eval_per_identity));
    for (int i = 0; i < n; ++i) {
      (i < n - eval_per_identity ? split.train : split.eval).push_back(members[static_cast<size_t>(i)]);
    }
  }
  return split;
}

TeacherModel train_teacher(const Dataset& data, const std::vector<int>& train_indices,
                           const TeacherConfig& teacher_cfg, const TrainConfig& cfg,
                           const MarginConfig& margin, std::vector<EpochMetrics>* history,
                           const std::filesystem::path* csv_log) {
  cfg.validate();
  margin.validate();
  validate_training_dataset(data, train_indices);

  Rng master(cfg.rng_seed);
  TeacherModel teacher(teacher_cfg, master.next_u64());
  Rng class_rng = master.fork(2);
  const int flat = teacher_cfg.embed_dim;
  ClassWeights classifier(data.num_identities, flat, class_rng);

  std::vector<Parameter*> params;
  for (NamedParam p : teacher.named_params()) params.push_back(p.param);
  params.push_back(&classifier.rows);

  std::vector<Tensor> images = normalized_images(data);
  std::vector<int> order = train_indices;

  for (int epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(epoch, cfg);
    shuffle_indices(order, master);

    double loss_sum = 0.0;
    int loss_count = 0;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
      Graph g;
      Graph::NodeId batch_loss = -1;
      for (size_t i = begin; i < end; ++i) {
        const int idx = order[i];
        const Tensor input = random_hflip(images[static_cast<size_t>(idx)], master);
        auto embedding = teacher.embed_node(g, input);
        auto cosines = g.row_cosines(embedding, g.param(classifier.rows));
        auto loss = margin_softmax_loss(g, cosines, data.images[static_cast<size_t>(idx)].identity_id,
                                        margin);
        batch_loss = batch_loss < 0 ? loss : g.add(batch_loss, loss);
      }
      const int count = static_cast<int>(end - begin);
      auto mean_loss = g.scale(batch_loss, 1.0 / count);
      g.backward(mean_loss);
      sgd_step(params, lr);
      loss_sum += g.value(mean_loss).scalar_value() * count;
      loss_count += count;
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.lr = lr;
    metrics.mean_l_id = loss_sum / loss_count;
    metrics.mean_l_cos = 0.0;
    metrics.wall_seconds = seconds_since(start);
    if (history) history->push_back(metrics);
    if (csv_log) append_metrics_csv(*csv_log, metrics);
  }
  return teacher;
}

EpochMetrics train_xcos_epoch(XcosModel& model, const Dataset& data,
                              const std::vector<int>& train_indices,
                              const TeacherModel& teacher, const TrainConfig& cfg,
                              const MarginConfig& margin, int epoch, Rng& rng) {
  cfg.validate();
  margin.validate();
  validate_training_dataset(data, train_indices);

  const auto start = std::chrono::steady_clock::now();
  const double lr = lr_at_epoch(epoch, cfg);

  std::vector<Parameter*> params;
  for (NamedParam p : model.named_params()) params.push_back(p.param);

  std::vector<Tensor> images = normalized_images(data);
  std::vector<int> order = train_indices;
  shuffle_indices(order, rng);

  const int pairs_pos = std::max(1, cfg.pairs_per_batch / 2);
  const int pairs_neg = std::max(1, cfg.pairs_per_batch - pairs_pos);

  double id_sum = 0.0, cos_sum = 0.0;
  int id_count = 0, cos_count = 0;

  for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
    const size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
    Graph g;

    // Identity branch: margin loss on the flattened grid feature.
    Graph::NodeId id_loss = -1;
    for (size_t i = begin; i < end; ++i) {
      const int idx = order[i];
      const Tensor input = random_hflip(images[static_cast<size_t>(idx)], rng);
      auto grid = model.backbone().extract_grid_node(g, input);
      auto embedding = g.reshape(grid, {g.value(grid).size()});
      auto cosines = g.row_cosines(embedding, g.param(model.classifier().rows));
      auto loss = margin_softmax_loss(g, cosines, data.images[static_cast<size_t>(idx)].identity_id,
                                      margin);
      id_loss = id_loss < 0 ? loss : g.add(id_loss, loss);
    }
    const int id_batch = static_cast<int>(end - begin);
    id_loss = g.scale(id_loss, 1.0 / id_batch);

    // Pair branch: regress the attention-weighted score to the frozen
    // teacher's cosine on the very same (possibly flipped) inputs.
    const std::vector<PairRecord> pairs = sample_pairs(data, train_indices, pairs_pos, pairs_neg,
                                                       rng);
    std::vector<Graph::NodeId> scores;
    std::vector<double> targets;
    scores.reserve(pairs.size());
    targets.reserve(pairs.size());
    for (const PairRecord& pair : pairs) {
      const Tensor input_a = random_hflip(images[static_cast<size_t>(pair.index_a)], rng);
      const Tensor input_b = random_hflip(images[static_cast<size_t>(pair.index_b)], rng);
      auto ga = model.backbone().extract_grid_node(g, input_a);
      auto gb = model.backbone().extract_grid_node(g, input_b);
      auto s = g.grid_cosine_map(ga, gb);
      auto w = model.attention().attention_node(g, ga, gb);
      scores.push_back(g.frobenius_inner(s, w));
      targets.push_back(teacher_score(teacher, input_a, input_b));
    }
    auto cos_loss = regression_loss(g, scores, targets);

    auto objective = total_loss(g, cos_loss, id_loss, cfg.lambda);
    g.backward(objective);
    sgd_step(params, lr);

    id_sum += g.value(id_loss).scalar_value() * id_batch;
    id_count += id_batch;
    cos_sum += g.value(cos_loss).scalar_value() * static_cast<int>(pairs.size());
    cos_count += static_cast<int>(pairs.size());
  }

  EpochMetrics metrics;
  metrics.epoch = epoch;
  metrics.lr = lr;
  metrics.mean_l_id = id_sum / id_count;
  metrics.mean_l_cos = cos_sum / cos_count;
  metrics.wall_seconds = seconds_since(start);
  return metrics;
}

std::vector<EpochMetrics> train_xcos(XcosModel& model, const Dataset& data,
                                     const std::vector<int>& train_indices,
                                     const TeacherModel& teacher, const TrainConfig& cfg,
                                     const MarginConfig& margin,
                                     const std::filesystem::path* csv_log) {
  cfg.validate();
  if (cfg.init_from_teacher) model.init_trunk_from(teacher);
  Rng master(cfg.rng_seed);
  std::vector<EpochMetrics> history;
  for (int epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    EpochMetrics metrics = train_xcos_epoch(model, data, train_indices, teacher, cfg, margin,
                                            epoch, master);
    if (csv_log) append_metrics_csv(*csv_log, metrics);
    history.push_back(metrics);
  }
  return history;
}

std::vector<CalibrationSample> collect_calibration_samples(const XcosModel& model,
                                                           const TeacherModel& teacher,
                                                           const std::vector<Tensor>& images,
                                                           const std::vector<PairRecord>& pairs) {
  std::vector<CalibrationSample> samples;
  samples.reserve(pairs.size());
  for (const PairRecord& pair : pairs) {
    CalibrationSample s;
    s.grid_a = model.backbone().extract_grid(images[static_cast<size_t>(pair.index_a)]);
    s.grid_b = model.backbone().extract_grid(images[static_cast<size_t>(pair.index_b)]);
    s.teacher_score = teacher_score(teacher, images[static_cast<size_t>(pair.index_a)],
                                    images[static_cast<size_t>(pair.index_b)]);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace xcos
