#include "xcos/losses.hpp"

#include <cmath>

namespace xcos {

using detail::check;

void MarginConfig::validate() const {
  check(scale > 0.0, "margin scale s must be positive");
  check(margin >= 0.0 && margin < 1.5707963267948966, "margin must be in [0, pi/2)");
}

void TrainConfig::validate() const {
  check(lambda >= 0.0, "lambda must be nonnegative");
  check(batch_size >= 1, "batch_size must be positive");
  check(pairs_per_batch >= 1, "pairs_per_batch must be positive");
  check(base_lr > 0.0, "base_lr must be positive");
  check(total_epochs >= 1, "total_epochs must be positive");
  for (int d : lr_drop_epochs) {
    check(d >= 1 && d <= total_epochs, "lr drop epoch " + std::to_string(d) +
                                           " outside [1, " + std::to_string(total_epochs) + "]");
  }
}

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
  check(epoch >= 1 && epoch <= cfg.total_epochs, "epoch " + std::to_string(epoch) +
                                                     " outside the configured schedule");
  int drops = 0;
  for (int d : cfg.lr_drop_epochs) {
    if (epoch > d) ++drops;
  }
  return cfg.base_lr / std::pow(10.0, drops);
}

Graph::NodeId margin_softmax_loss(Graph& g, Graph::NodeId cosines, int label,
                                  const MarginConfig& cfg) {
  cfg.validate();
  return g.margin_softmax(cosines, label, cfg.scale, cfg.margin);
}

double margin_softmax_loss_value(const Tensor& cosines, int label, const MarginConfig& cfg) {
  Graph g;
  auto loss = margin_softmax_loss(g, g.constant(cosines), label, cfg);
  return g.value(loss).scalar_value();
}

Graph::NodeId regression_loss(Graph& g, std::span<const Graph::NodeId> scores,
                              std::span<const double> targets) {
  check(!scores.empty(), "regression loss needs at least one pair");
  check(scores.size() == targets.size(),
        "regression loss got " + std::to_string(scores.size()) + " scores but " +
            std::to_string(targets.size()) + " targets");
  Graph::NodeId acc = -1;
  for (size_t i = 0; i < scores.size(); ++i) {
    auto diff = g.sub(scores[i], g.constant(Tensor::scalar(targets[i])));
    auto sq = g.mul(diff, diff);
    acc = (acc < 0) ? sq : g.add(acc, sq);
  }
  return g.scale(acc, 1.0 / static_cast<double>(scores.size()));
}

double regression_loss_value(std::span<const double> c, std::span<const double> c_prime) {
  check(!c.empty() && c.size() == c_prime.size(),
        "regression loss needs equal-length nonempty score lists");
  double acc = 0.0;
  for (size_t i = 0; i < c.size(); ++i) {
    const double d = c[i] - c_prime[i];
    acc += d * d;
  }
  return acc / static_cast<double>(c.size());
}

Graph::NodeId total_loss(Graph& g, Graph::NodeId l_cos, Graph::NodeId l_id, double lambda) {
  return g.add(l_cos, g.scale(l_id, lambda));
}

}  // namespace xcos
