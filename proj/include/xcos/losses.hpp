#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xcos/graph.hpp"
#include "xcos/tensor.hpp"

namespace xcos {

struct MarginConfig {
  double scale = 16.0;   // s
  double margin = 0.3;   // additive angle, radians

  void validate() const;
};

struct TrainConfig {
  double lambda = 1.0;                          // identity-loss weight
  int batch_size = 32;                          // images per identity batch
  int pairs_per_batch = 16;                     // pairs per regression batch
  double base_lr = 1e-3;
  std::vector<int> lr_drop_epochs = {12, 15, 18};
  int total_epochs = 20;
  uint64_t rng_seed = 0;
  bool init_from_teacher = false;               // copy teacher trunk weights

  void validate() const;
};

// base_lr / 10^k where k counts the drops already passed.
double lr_at_epoch(int epoch, const TrainConfig& cfg);

// Additive angular margin cross-entropy on class cosines (graph op wrapper).
Graph::NodeId margin_softmax_loss(Graph& g, Graph::NodeId cosines, int label,
                                  const MarginConfig& cfg);

// Plain evaluation of the same loss, for tests and reporting.
double margin_softmax_loss_value(const Tensor& cosines, int label, const MarginConfig& cfg);

// Mean squared error between predicted scores and reference scores.
Graph::NodeId regression_loss(Graph& g, std::span<const Graph::NodeId> scores,
                              std::span<const double> targets);

double regression_loss_value(std::span<const double> c, std::span<const double> c_prime);

// l_cos + lambda * l_id.
Graph::NodeId total_loss(Graph& g, Graph::NodeId l_cos, Graph::NodeId l_id, double lambda);

}  // namespace xcos
