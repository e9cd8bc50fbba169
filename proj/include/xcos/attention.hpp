#pragma once

#include "xcos/metric.hpp"

namespace xcos {

// Learnable attention conditioned on the input pair: shared 3x3 reduction
// conv (c_F -> c_F/2) on each feature, channel concat, two fusion convs
// (c_F -> c_F/2 with ReLU, then c_F/2 -> 1), flatten, softmax, reshape.
// All convs are 3x3 with padding 1, so the spatial extent is preserved.
// The final conv carries no bias: the softmax is shift-invariant, so a
// single-channel output bias could never affect the map.
class AttentionNet {
 public:
  AttentionNet() = default;
  AttentionNet(int grid_channels, uint64_t seed);  // rejects odd channel counts

  int grid_channels() const { return grid_channels_; }

  AttentionMap learned_attention(const GridFeature& fa, const GridFeature& fb) const;
  Graph::NodeId attention_node(Graph& g, Graph::NodeId fa, Graph::NodeId fb);

  std::vector<NamedParam> named_params();

 private:
  int grid_channels_ = 0;
  Parameter reduce_weight_, reduce_bias_;  // shared across both inputs
  Parameter fuse1_weight_, fuse1_bias_;
  Parameter fuse2_weight_;
  Tensor fuse2_zero_bias_;
};

}  // namespace xcos
