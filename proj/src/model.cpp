#include "xcos/model.hpp"

namespace xcos {

using detail::check;

void TeacherConfig::validate() const {
  trunk.validate();
  check(embed_dim >= 2, "teacher embedding dimension must be >= 2");
}

TeacherModel::TeacherModel(const TeacherConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  trunk_ = ConvStack(3, cfg_.trunk.block_channels, rng);
  const int flat = trunk_.out_channels() * cfg_.trunk.grid_height() * cfg_.trunk.grid_width();
  fc_weight_ = Parameter(uniform_init({cfg_.embed_dim, flat}, flat, cfg_.embed_dim, rng));
  fc_bias_ = Parameter(bias_init(cfg_.embed_dim, flat, rng));
}

Tensor TeacherModel::embed(const Tensor& image) const {
  check(image.rank() == 3 && image.extent(0) == 3 &&
            image.extent(1) == cfg_.trunk.input_height &&
            image.extent(2) == cfg_.trunk.input_width,
        "teacher expects a (3, " + std::to_string(cfg_.trunk.input_height) + ", " +
            std::to_string(cfg_.trunk.input_width) + ") image, got " + image.shape_str());
  Tensor features = trunk_.forward(image).flattened();
  return ops::linear(features, fc_weight_.value, fc_bias_.value);
}

Graph::NodeId TeacherModel::embed_node(Graph& g, const Tensor& image) {
  Graph::NodeId features = trunk_.forward_node(g, image);
  const Tensor& v = g.value(features);
  Graph::NodeId flat = g.reshape(features, {v.size()});
  return g.linear(flat, g.param(fc_weight_), g.param(fc_bias_));
}

std::vector<NamedParam> TeacherModel::named_params() {
  std::vector<NamedParam> out = trunk_.named_params("teacher");
  out.push_back({"teacher.fc.weight", &fc_weight_});
  out.push_back({"teacher.fc.bias", &fc_bias_});
  return out;
}

double teacher_score(const TeacherModel& teacher, const Tensor& a, const Tensor& b) {
  return ops::cosine(teacher.embed(a), teacher.embed(b));
}

XcosModel::XcosModel(const BackboneConfig& cfg, int num_classes, uint64_t seed) {
  Rng rng(seed);
  backbone_ = GridBackbone(cfg, rng.next_u64());
  attention_ = AttentionNet(cfg.grid_channels, rng.next_u64());
  classifier_ = ClassWeights(num_classes, cfg.embedding_dim(), rng);
}

XcosScore XcosModel::score(const Tensor& image_a, const Tensor& image_b,
                           AttentionVariant variant) const {
  const GridFeature fa = backbone_.extract_grid(image_a);
  const GridFeature fb = backbone_.extract_grid(image_b);
  const PatchedCosineMap s = patched_cosine_map(fa, fb);
  AttentionMap w;
  switch (variant) {
    case AttentionVariant::unit:
      w = unit_attention(fa.height(), fa.width());
      break;
    case AttentionVariant::correlated:
      check(calibration_.has_value(),
            "correlated attention requested but no calibration table is present");
      w = calibration_->attention();
      break;
    case AttentionVariant::learned:
      w = attention_.learned_attention(fa, fb);
      break;
  }
  return xcos(s, w);
}

void XcosModel::init_trunk_from(const TeacherModel& teacher) {
  const auto& src_w = teacher.trunk().weights();
  auto& dst_w = backbone_.trunk().weights();
  check(src_w.size() == dst_w.size(), "teacher and backbone trunks differ in depth");
  for (size_t i = 0; i < src_w.size(); ++i) {
    check(src_w[i].value.same_shape(dst_w[i].value),
          "teacher and backbone trunks differ in block shapes");
  }
  auto& dst_b = backbone_.trunk().biases();
  const auto& src_b = teacher.trunk().biases();
  for (size_t i = 0; i < src_w.size(); ++i) {
    dst_w[i].value = src_w[i].value;
    dst_b[i].value = src_b[i].value;
  }
}

std::vector<NamedParam> XcosModel::named_params() {
  std::vector<NamedParam> out = backbone_.named_params();
  for (NamedParam p : attention_.named_params()) out.push_back(p);
  out.push_back({"classifier.rows", &classifier_.rows});
  return out;
}

}  // namespace xcos
