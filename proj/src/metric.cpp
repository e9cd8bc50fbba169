#include "xcos/metric.hpp"

#include <cmath>
#include <iostream>

namespace xcos {

using detail::check;

std::string to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::unit: return "unit";
    case AttentionVariant::correlated: return "correlated";
    case AttentionVariant::learned: return "learned";
  }
  return "unknown";
}

AttentionVariant attention_variant_from_string(const std::string& name) {
  if (name == "unit") return AttentionVariant::unit;
  if (name == "correlated") return AttentionVariant::correlated;
  if (name == "learned") return AttentionVariant::learned;
  detail::fail("unknown attention variant '" + name + "' (want unit, correlated, or learned)");
}

PatchedCosineMap patched_cosine_map(const GridFeature& fa, const GridFeature& fb) {
  check(fa.values.same_shape(fb.values), "grid features differ in shape: " +
                                             fa.values.shape_str() + " vs " +
                                             fb.values.shape_str());
  return PatchedCosineMap{ops::grid_cosine_map(fa.values, fb.values)};
}

AttentionMap unit_attention(int height, int width) {
  check(height >= 1 && width >= 1, "unit attention dimensions must be positive");
  Tensor values({height, width});
  values.fill(1.0 / static_cast<double>(height * width));
  return AttentionMap{AttentionVariant::unit, std::move(values)};
}

XcosScore xcos(const PatchedCosineMap& s, const AttentionMap& w) {
  XcosScore score;
  score.value = ops::frobenius_inner(w.values, s.values);
  score.similarity = s;
  score.attention = w;
  return score;
}

bool verify(const XcosScore& score, double threshold) { return score.value > threshold; }

AttentionMap CalibrationTable::attention(bool clip_negative_renormalize) const {
  AttentionMap map{AttentionVariant::correlated, correlations};
  if (clip_negative_renormalize) {
    double total = 0.0;
    for (int i = 0; i < map.values.size(); ++i) {
      if (map.values[i] < 0.0) map.values[i] = 0.0;
      total += map.values[i];
    }
    if (total > 0.0) {
      for (int i = 0; i < map.values.size(); ++i) map.values[i] /= total;
    }
  }
  return map;
}

nlohmann::json CalibrationTable::to_json() const {
  nlohmann::json j;
  j["height"] = correlations.extent(0);
  j["width"] = correlations.extent(1);
  j["pair_count"] = pair_count;
  j["teacher_id"] = teacher_id;
  std::vector<std::vector<double>> rows;
  const int h = correlations.extent(0), w = correlations.extent(1);
  for (int y = 0; y < h; ++y) {
    std::vector<double> row(static_cast<size_t>(w));
    for (int x = 0; x < w; ++x) row[static_cast<size_t>(x)] = correlations.at({y, x});
    rows.push_back(std::move(row));
  }
  j["correlations"] = rows;
  if (!pair_indices.empty()) {
    std::vector<std::vector<int>> pairs;
    for (const auto& [a, b] : pair_indices) pairs.push_back({a, b});
    j["pair_indices"] = pairs;
  }
  return j;
}

CalibrationTable CalibrationTable::from_json(const nlohmann::json& j) {
  CalibrationTable table;
  const int h = j.at("height").get<int>();
  const int w = j.at("width").get<int>();
  table.pair_count = j.at("pair_count").get<int>();
  table.teacher_id = j.at("teacher_id").get<std::string>();
  table.correlations = Tensor({h, w});
  const auto& rows = j.at("correlations");
  check(static_cast<int>(rows.size()) == h, "calibration JSON row count mismatch");
  for (int y = 0; y < h; ++y) {
    check(static_cast<int>(rows[y].size()) == w, "calibration JSON column count mismatch");
    for (int x = 0; x < w; ++x) table.correlations.at({y, x}) = rows[y][x].get<double>();
  }
  if (j.contains("pair_indices")) {
    for (const auto& pair : j["pair_indices"]) {
      table.pair_indices.emplace_back(pair[0].get<int>(), pair[1].get<int>());
    }
  }
  return table;
}

CalibrationTable correlated_attention(const std::vector<CalibrationSample>& samples,
                                      const std::string& teacher_id) {
  check(samples.size() >= 2, "calibration needs at least 2 pairs, got " +
                                 std::to_string(samples.size()));
  const Tensor& first = samples.front().grid_a.values;
  for (const CalibrationSample& s : samples) {
    check(s.grid_a.values.same_shape(first) && s.grid_b.values.same_shape(first),
          "calibration grids differ in shape");
  }
  const int h = first.extent(1), w = first.extent(2);
  const int n = static_cast<int>(samples.size());

  // Local cosine per grid per pair, plus the shared teacher series.
  std::vector<Tensor> local;
  local.reserve(static_cast<size_t>(n));
  std::vector<double> teacher(static_cast<size_t>(n));
  for (int p = 0; p < n; ++p) {
    local.push_back(ops::grid_cosine_map(samples[static_cast<size_t>(p)].grid_a.values,
                                         samples[static_cast<size_t>(p)].grid_b.values));
    teacher[static_cast<size_t>(p)] = samples[static_cast<size_t>(p)].teacher_score;
  }

  double teacher_mean = 0.0;
  for (double t : teacher) teacher_mean += t;
  teacher_mean /= n;
  double teacher_var = 0.0;
  for (double t : teacher) teacher_var += (t - teacher_mean) * (t - teacher_mean);

  CalibrationTable table;
  table.pair_count = n;
  table.teacher_id = teacher_id;
  table.correlations = Tensor({h, w});

  for (int g = 0; g < h * w; ++g) {
    double mean = 0.0;
    for (int p = 0; p < n; ++p) mean += local[static_cast<size_t>(p)][g];
    mean /= n;
    double var = 0.0, cov = 0.0;
    for (int p = 0; p < n; ++p) {
      const double d = local[static_cast<size_t>(p)][g] - mean;
      var += d * d;
      cov += d * (teacher[static_cast<size_t>(p)] - teacher_mean);
    }
    if (var < 1e-24 || teacher_var < 1e-24) {
      std::cerr << "warning: zero-variance grid (" << g / w << ", " << g % w
                << ") in calibration, weight set to 0\n";
      table.correlations[g] = 0.0;
    } else {
      table.correlations[g] = cov / std::sqrt(var * teacher_var);
    }
  }
  return table;
}

}  // namespace xcos
