#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xcos/graph.hpp"
#include "xcos/rng.hpp"
#include "xcos/tensor.hpp"

namespace xcos {

struct NamedParam {
  std::string name;
  Parameter* param;
};

struct BackboneConfig {
  int input_height = 112;
  int input_width = 112;
  std::vector<int> block_channels = {16, 32, 64, 128};  // one stride-2 block each
  int grid_channels = 32;                               // c_F

  int blocks() const { return static_cast<int>(block_channels.size()); }
  int grid_height() const { return input_height >> blocks(); }
  int grid_width() const { return input_width >> blocks(); }
  int embedding_dim() const { return grid_channels * grid_height() * grid_width(); }

  // Inputs must be square power-of-two multiples of 7 so the grid is exactly
  // 7x7 after the stride-2 blocks.
  void validate() const;
};

// Spatial feature (c_F, h_F, w_F); each grid cell describes one face region.
struct GridFeature {
  Tensor values;

  int channels() const { return values.extent(0); }
  int height() const { return values.extent(1); }
  int width() const { return values.extent(2); }
  // The per-grid feature vector at spatial position (i, j).
  Tensor grid_vector(int i, int j) const;
};

// Row-major flattening of a grid feature and its inverse.
Tensor flatten(const GridFeature& grid);
GridFeature unflatten(const Tensor& embedding, int channels, int height, int width);

// Classifier rows, one normalized-cosine logit per training identity.
struct ClassWeights {
  Parameter rows;  // (num_classes, dim)

  ClassWeights() = default;
  ClassWeights(int num_classes, int dim, Rng& rng);
  int num_classes() const { return rows.value.extent(0); }
};

// Cosine of the L2-normalized embedding against each normalized class row.
Tensor class_cosines(const Tensor& embedding, const Tensor& rows);

// Stack of stride-2 3x3 conv + ReLU blocks shared by the grid extractor and
// the teacher trunk.
class ConvStack {
 public:
  ConvStack() = default;
  ConvStack(int in_channels, const std::vector<int>& out_channels, Rng& rng);

  Tensor forward(const Tensor& image) const;
  Graph::NodeId forward_node(Graph& g, const Tensor& image);

  int out_channels() const;
  std::vector<NamedParam> named_params(const std::string& prefix);
  const std::vector<Parameter>& weights() const { return weights_; }
  std::vector<Parameter>& weights() { return weights_; }
  const std::vector<Parameter>& biases() const { return biases_; }
  std::vector<Parameter>& biases() { return biases_; }

 private:
  std::vector<Parameter> weights_;  // (C_out, C_in, 3, 3) each
  std::vector<Parameter> biases_;
};

// Trunk plus a final 1x1 convolution producing the grid feature. The 1x1
// head has a bias and no nonlinearity so grid features keep their sign.
class GridBackbone {
 public:
  GridBackbone() = default;
  GridBackbone(const BackboneConfig& cfg, uint64_t seed);

  const BackboneConfig& config() const { return cfg_; }

  GridFeature extract_grid(const Tensor& image) const;
  Graph::NodeId extract_grid_node(Graph& g, const Tensor& image);

  std::vector<NamedParam> named_params();
  ConvStack& trunk() { return trunk_; }

 private:
  void check_input(const Tensor& image) const;

  BackboneConfig cfg_;
  ConvStack trunk_;
  Parameter head_weight_;  // (c_F, trunk_out, 1, 1)
  Parameter head_bias_;
};

// Uniform Xavier-style initialization used by all layers.
Tensor uniform_init(std::vector<int> shape, int fan_in, int fan_out, Rng& rng);

// Bias initialization, uniform in +-1/sqrt(fan_in). A nonzero bias keeps
// grid vectors of dead trunk cells away from the zero-vector cosine guard.
Tensor bias_init(int count, int fan_in, Rng& rng);

}  // namespace xcos
