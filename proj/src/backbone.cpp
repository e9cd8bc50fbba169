#include "xcos/backbone.hpp"

#include <cmath>

namespace xcos {

using detail::check;

void BackboneConfig::validate() const {
  check(input_height == input_width, "input must be square, got " +
                                         std::to_string(input_height) + "x" +
                                         std::to_string(input_width));
  check(!block_channels.empty(), "backbone needs at least one stride-2 block");
  for (int c : block_channels) check(c >= 1, "block channel counts must be positive");
  check(grid_channels >= 2, "grid_channels must be >= 2, got " + std::to_string(grid_channels));
  const int k = blocks();
  check((input_height % (1 << k)) == 0 && (input_height >> k) == 7,
        "input size " + std::to_string(input_height) + " with " + std::to_string(k) +
            " stride-2 blocks does not reduce to a 7x7 grid; use a power-of-two multiple of 7");
}

Tensor GridFeature::grid_vector(int i, int j) const {
  const int c = channels(), h = height(), w = width();
  check(i >= 0 && i < h && j >= 0 && j < w, "grid position out of range");
  Tensor out({c});
  for (int ch = 0; ch < c; ++ch) out[ch] = values[(ch * h + i) * w + j];
  return out;
}

Tensor flatten(const GridFeature& grid) { return grid.values.flattened(); }

GridFeature unflatten(const Tensor& embedding, int channels, int height, int width) {
  return GridFeature{embedding.reshaped({channels, height, width})};
}

Tensor uniform_init(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t[i] = rng.next_real(-bound, bound);
  return t;
}

Tensor bias_init(int count, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t({count});
  for (int i = 0; i < count; ++i) t[i] = rng.next_real(-bound, bound);
  return t;
}

ClassWeights::ClassWeights(int num_classes, int dim, Rng& rng) {
  check(num_classes >= 2, "classifier needs at least two classes");
  rows = Parameter(uniform_init({num_classes, dim}, dim, num_classes, rng));
}

Tensor class_cosines(const Tensor& embedding, const Tensor& rows) {
  return ops::row_cosines(embedding, rows);
}

ConvStack::ConvStack(int in_channels, const std::vector<int>& out_channels, Rng& rng) {
  int c_in = in_channels;
  for (int c_out : out_channels) {
    const int fan_in = c_in * 9, fan_out = c_out * 9;
    weights_.emplace_back(uniform_init({c_out, c_in, 3, 3}, fan_in, fan_out, rng));
    biases_.emplace_back(Parameter(bias_init(c_out, fan_in, rng)));
    c_in = c_out;
  }
}

int ConvStack::out_channels() const {
  return weights_.empty() ? 0 : weights_.back().value.extent(0);
}

Tensor ConvStack::forward(const Tensor& image) const {
  Tensor x = image;
  for (size_t i = 0; i < weights_.size(); ++i) {
    x = ops::relu(ops::conv2d(x, weights_[i].value, biases_[i].value, 2, 1));
  }
  return x;
}

Graph::NodeId ConvStack::forward_node(Graph& g, const Tensor& image) {
  Graph::NodeId x = g.constant(image);
  for (size_t i = 0; i < weights_.size(); ++i) {
    x = g.relu(g.conv2d(x, g.param(weights_[i]), g.param(biases_[i]), 2, 1));
  }
  return x;
}

std::vector<NamedParam> ConvStack::named_params(const std::string& prefix) {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < weights_.size(); ++i) {
    out.push_back({prefix + ".block" + std::to_string(i) + ".weight", &weights_[i]});
    out.push_back({prefix + ".block" + std::to_string(i) + ".bias", &biases_[i]});
  }
  return out;
}

GridBackbone::GridBackbone(const BackboneConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  trunk_ = ConvStack(3, cfg_.block_channels, rng);
  const int trunk_out = trunk_.out_channels();
  head_weight_ = Parameter(
      uniform_init({cfg_.grid_channels, trunk_out, 1, 1}, trunk_out, cfg_.grid_channels, rng));
  head_bias_ = Parameter(bias_init(cfg_.grid_channels, trunk_out, rng));
}

void GridBackbone::check_input(const Tensor& image) const {
  check(image.rank() == 3 && image.extent(0) == 3 && image.extent(1) == cfg_.input_height &&
            image.extent(2) == cfg_.input_width,
        "backbone expects a (3, " + std::to_string(cfg_.input_height) + ", " +
            std::to_string(cfg_.input_width) + ") image, got " + image.shape_str());
}

GridFeature GridBackbone::extract_grid(const Tensor& image) const {
  check_input(image);
  Tensor trunk_out = trunk_.forward(image);
  return GridFeature{ops::conv2d(trunk_out, head_weight_.value, head_bias_.value, 1, 0)};
}

Graph::NodeId GridBackbone::extract_grid_node(Graph& g, const Tensor& image) {
  check_input(image);
  Graph::NodeId trunk_out = trunk_.forward_node(g, image);
  return g.conv2d(trunk_out, g.param(head_weight_), g.param(head_bias_), 1, 0);
}

std::vector<NamedParam> GridBackbone::named_params() {
  std::vector<NamedParam> out = trunk_.named_params("backbone");
  out.push_back({"backbone.head.weight", &head_weight_});
  out.push_back({"backbone.head.bias", &head_bias_});
  return out;
}

}  // namespace xcos
