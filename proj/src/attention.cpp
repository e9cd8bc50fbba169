#include "xcos/attention.hpp"

namespace xcos {

using detail::check;

AttentionNet::AttentionNet(int grid_channels, uint64_t seed) : grid_channels_(grid_channels) {
  check(grid_channels >= 2, "attention needs at least 2 grid channels");
  check(grid_channels % 2 == 0, "attention reduction halves the channels; grid_channels " +
                                    std::to_string(grid_channels) + " is odd");
  Rng rng(seed);
  const int half = grid_channels / 2;
  reduce_weight_ = Parameter(
      uniform_init({half, grid_channels, 3, 3}, grid_channels * 9, half * 9, rng));
  reduce_bias_ = Parameter(bias_init(half, grid_channels * 9, rng));
  fuse1_weight_ = Parameter(
      uniform_init({half, grid_channels, 3, 3}, grid_channels * 9, half * 9, rng));
  fuse1_bias_ = Parameter(bias_init(half, grid_channels * 9, rng));
  fuse2_weight_ = Parameter(uniform_init({1, half, 3, 3}, half * 9, 9, rng));
  fuse2_zero_bias_ = Tensor({1});
}

AttentionMap AttentionNet::learned_attention(const GridFeature& fa, const GridFeature& fb) const {
  check(fa.values.same_shape(fb.values), "attention inputs differ in shape");
  check(fa.channels() == grid_channels_, "attention expects " + std::to_string(grid_channels_) +
                                             " channels, got " + std::to_string(fa.channels()));
  const int h = fa.height(), w = fa.width();
  Tensor ra = ops::conv2d(fa.values, reduce_weight_.value, reduce_bias_.value, 1, 1);
  Tensor rb = ops::conv2d(fb.values, reduce_weight_.value, reduce_bias_.value, 1, 1);
  Tensor fused = ops::concat_channels(ra, rb);
  Tensor f1 = ops::relu(ops::conv2d(fused, fuse1_weight_.value, fuse1_bias_.value, 1, 1));
  Tensor logits = ops::conv2d(f1, fuse2_weight_.value, fuse2_zero_bias_, 1, 1);
  Tensor weights = ops::softmax_flat(logits.flattened()).reshaped({h, w});
  return AttentionMap{AttentionVariant::learned, std::move(weights)};
}

Graph::NodeId AttentionNet::attention_node(Graph& g, Graph::NodeId fa, Graph::NodeId fb) {
  const Tensor& shape_probe = g.value(fa);
  check(shape_probe.extent(0) == grid_channels_, "attention expects " +
                                                     std::to_string(grid_channels_) +
                                                     " channels, got " + shape_probe.shape_str());
  const int h = shape_probe.extent(1), w = shape_probe.extent(2);
  auto rw = g.param(reduce_weight_);
  auto rb = g.param(reduce_bias_);
  auto ra = g.conv2d(fa, rw, rb, 1, 1);
  auto rb2 = g.conv2d(fb, rw, rb, 1, 1);
  auto fused = g.concat_channels(ra, rb2);
  auto f1 = g.relu(g.conv2d(fused, g.param(fuse1_weight_), g.param(fuse1_bias_), 1, 1));
  auto logits = g.conv2d(f1, g.param(fuse2_weight_), g.constant(fuse2_zero_bias_), 1, 1);
  auto weights = g.softmax_flat(g.reshape(logits, {h * w}));
  return g.reshape(weights, {h, w});
}

std::vector<NamedParam> AttentionNet::named_params() {
  return {
      {"attention.reduce.weight", &reduce_weight_}, {"attention.reduce.bias", &reduce_bias_},
      {"attention.fuse1.weight", &fuse1_weight_},   {"attention.fuse1.bias", &fuse1_bias_},
      {"attention.fuse2.weight", &fuse2_weight_},
  };
}

}  // namespace xcos
