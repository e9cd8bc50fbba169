#include "xcos/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "xcos/image_io.hpp"

namespace xcos {

using detail::check;

namespace {

nlohmann::json matrix_json(const Tensor& m) {
  std::vector<std::vector<double>> rows;
  const int h = m.extent(0), w = m.extent(1);
  for (int y = 0; y < h; ++y) {
    std::vector<double> row(static_cast<size_t>(w));
    for (int x = 0; x < w; ++x) row[static_cast<size_t>(x)] = m.at({y, x});
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor matrix_from_json(const nlohmann::json& j) {
  const int h = static_cast<int>(j.size());
  check(h > 0, "explanation matrix is empty");
  const int w = static_cast<int>(j[0].size());
  Tensor m({h, w});
  for (int y = 0; y < h; ++y) {
    check(static_cast<int>(j[y].size()) == w, "explanation matrix is ragged");
    for (int x = 0; x < w; ++x) m.at({y, x}) = j[y][x].get<double>();
  }
  return m;
}

constexpr int kUpsample = 16;

std::vector<uint8_t> upsampled_bytes(const Tensor& m, double lo, double hi) {
  const int h = m.extent(0), w = m.extent(1);
  std::vector<uint8_t> out(static_cast<size_t>(h) * kUpsample * w * kUpsample);
  for (int y = 0; y < h * kUpsample; ++y) {
    for (int x = 0; x < w * kUpsample; ++x) {
      const double v = m.at({y / kUpsample, x / kUpsample});
      const double t = (v - lo) / (hi - lo);
      const int byte = static_cast<int>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
      out[static_cast<size_t>(y) * w * kUpsample + x] = static_cast<uint8_t>(byte);
    }
  }
  return out;
}

}  // namespace

nlohmann::json ExplanationRecord::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["pair_id"] = pair_id;
  j["image_a"] = image_a;
  j["image_b"] = image_b;
  j["xcos"] = xcos_value;
  if (teacher_value.has_value()) j["teacher_cosine"] = *teacher_value;
  j["attention_variant"] = to_string(variant);
  j["threshold"] = threshold;
  j["decision"] = decision;
  j["grid_shape"] = {similarity.extent(0), similarity.extent(1)};
  j["patched_cosine_map"] = matrix_json(similarity);
  j["attention_map"] = matrix_json(attention);
  return j;
}

ExplanationRecord ExplanationRecord::from_json(const nlohmann::json& j) {
  ExplanationRecord rec;
  rec.pair_id = j.at("pair_id").get<std::string>();
  rec.image_a = j.at("image_a").get<std::string>();
  rec.image_b = j.at("image_b").get<std::string>();
  rec.xcos_value = j.at("xcos").get<double>();
  if (j.contains("teacher_cosine")) rec.teacher_value = j["teacher_cosine"].get<double>();
  rec.variant = attention_variant_from_string(j.at("attention_variant").get<std::string>());
  rec.threshold = j.at("threshold").get<double>();
  rec.decision = j.at("decision").get<bool>();
  rec.similarity = matrix_from_json(j.at("patched_cosine_map"));
  rec.attention = matrix_from_json(j.at("attention_map"));
  return rec;
}

void ExplanationRecord::validate_consistency(double tolerance) const {
  const double recomputed = ops::frobenius_inner(similarity, attention);
  check(std::fabs(recomputed - xcos_value) <= tolerance,
        "explanation record " + pair_id + " is inconsistent: stored score " +
            std::to_string(xcos_value) + " vs recomputed " + std::to_string(recomputed));
}

ExplanationRecord explain_pair(const XcosModel& model, const Tensor& image_a,
                               const Tensor& image_b, AttentionVariant variant,
                               double threshold, const TeacherModel* teacher,
                               const std::string& pair_id, const std::string& name_a,
                               const std::string& name_b) {
  const XcosScore score = model.score(image_a, image_b, variant);
  ExplanationRecord rec;
  rec.pair_id = pair_id;
  rec.image_a = name_a;
  rec.image_b = name_b;
  rec.xcos_value = score.value;
  if (teacher) rec.teacher_value = teacher_score(*teacher, image_a, image_b);
  rec.similarity = score.similarity.values;
  rec.attention = score.attention.values;
  rec.variant = variant;
  rec.threshold = threshold;
  rec.decision = verify(score, threshold);
  return rec;
}

std::filesystem::path export_explanation(const ExplanationRecord& record,
                                         const std::filesystem::path& out_dir) {
  record.validate_consistency();
  std::filesystem::create_directories(out_dir);

  const std::filesystem::path json_path = out_dir / (record.pair_id + ".json");
  std::ofstream json_out(json_path);
  check(json_out.good(), "cannot write explanation " + json_path.string());
  json_out << record.to_json().dump(2) << "\n";

  const int h = record.similarity.extent(0), w = record.similarity.extent(1);
  write_pgm(out_dir / (record.pair_id + "_S.pgm"), h * kUpsample, w * kUpsample,
            upsampled_bytes(record.similarity, -1.0, 1.0));

  double w_max = 0.0;
  for (int i = 0; i < record.attention.size(); ++i) w_max = std::max(w_max, record.attention[i]);
  std::vector<uint8_t> w_bytes;
  if (w_max > 0.0) {
    w_bytes = upsampled_bytes(record.attention, 0.0, w_max);
  } else {
    w_bytes.assign(static_cast<size_t>(h) * kUpsample * w * kUpsample, 0);
  }
  write_pgm(out_dir / (record.pair_id + "_W.pgm"), h * kUpsample, w * kUpsample, w_bytes);
  return json_path;
}

}  // namespace xcos
