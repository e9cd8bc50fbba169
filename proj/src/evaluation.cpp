#include "xcos/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace xcos {

using detail::check;

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["variant"] = variant;
  j["accuracy"] = accuracy;
  j["fold_thresholds"] = fold_thresholds;
  j["fold_accuracies"] = fold_accuracies;
  j["positive_pairs"] = positive_pairs;
  j["negative_pairs"] = negative_pairs;
  return j;
}

std::string EvalReport::table() const {
  std::ostringstream out;
  out << std::left << std::setw(12) << "variant" << std::setw(10) << "accuracy" << std::setw(8)
      << "folds" << std::setw(8) << "pos" << std::setw(8) << "neg" << "\n";
  out << std::left << std::setw(12) << variant << std::setw(10) << std::fixed
      << std::setprecision(4) << accuracy << std::setw(8) << fold_accuracies.size()
      << std::setw(8) << positive_pairs << std::setw(8) << negative_pairs << "\n";
  out << "fold  threshold   accuracy\n";
  for (size_t f = 0; f < fold_accuracies.size(); ++f) {
    out << std::left << std::setw(6) << f << std::setw(12) << std::setprecision(6)
        << fold_thresholds[f] << std::setprecision(4) << fold_accuracies[f] << "\n";
  }
  return out.str();
}

std::vector<int> fold_assignment(int count, int k_folds, Rng& rng) {
  std::vector<int> order(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<size_t>(i)] = i;
  for (size_t i = 0; i + 1 < order.size(); ++i) {
    const size_t j = i + static_cast<size_t>(rng.next_below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::vector<int> folds(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) folds[static_cast<size_t>(order[static_cast<size_t>(i)])] = i % k_folds;
  return folds;
}

namespace {

// Candidate thresholds from a score set: one below the minimum (accept all),
// midpoints between adjacent distinct scores, and the maximum (reject all
// under the strict > rule).
std::vector<double> candidate_thresholds(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> cands;
  cands.reserve(scores.size() + 1);
  cands.push_back(scores.front() - 1.0);
  for (size_t i = 0; i + 1 < scores.size(); ++i) {
    cands.push_back(0.5 * (scores[i] + scores[i + 1]));
  }
  cands.push_back(scores.back());
  return cands;
}

double accuracy_at(const std::vector<const ScoredPair*>& pairs, double threshold) {
  int correct = 0;
  for (const ScoredPair* p : pairs) {
    if ((p->score > threshold) == p->label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

}  // namespace

EvalReport best_threshold_accuracy_with_folds(const std::vector<ScoredPair>& scored,
                                              const std::vector<int>& folds, int k_folds,
                                              const std::string& variant) {
  check(k_folds >= 2, "k_folds must be >= 2");
  check(static_cast<int>(scored.size()) >= k_folds,
        "need at least one pair per fold: " + std::to_string(scored.size()) + " pairs for " +
            std::to_string(k_folds) + " folds");
  check(folds.size() == scored.size(), "fold assignment size mismatch");

  EvalReport report;
  report.variant = variant;
  for (const ScoredPair& p : scored) {
    check(std::isfinite(p.score), "pair scores must be finite");
    (p.label ? report.positive_pairs : report.negative_pairs)++;
  }
  check(report.positive_pairs > 0 && report.negative_pairs > 0,
        "threshold selection needs both labels present, got " +
            std::to_string(report.positive_pairs) + " positive and " +
            std::to_string(report.negative_pairs) + " negative pairs");

  for (int f = 0; f < k_folds; ++f) {
    std::vector<const ScoredPair*> train, eval;
    std::vector<double> train_scores;
    for (size_t i = 0; i < scored.size(); ++i) {
      if (folds[i] == f) {
        eval.push_back(&scored[i]);
      } else {
        train.push_back(&scored[i]);
        train_scores.push_back(scored[i].score);
      }
    }
    check(!train.empty() && !eval.empty(), "fold " + std::to_string(f) + " is empty");

    double best_threshold = 0.0, best_accuracy = -1.0;
    for (double t : candidate_thresholds(std::move(train_scores))) {
      const double acc = accuracy_at(train, t);
      if (acc > best_accuracy) {  // ties keep the smallest threshold
        best_accuracy = acc;
        best_threshold = t;
      }
    }
    report.fold_thresholds.push_back(best_threshold);
    report.fold_accuracies.push_back(accuracy_at(eval, best_threshold));
  }

  double total = 0.0;
  for (double a : report.fold_accuracies) total += a;
  report.accuracy = total / static_cast<double>(k_folds);
  return report;
}

EvalReport best_threshold_accuracy(const std::vector<ScoredPair>& scored, int k_folds, Rng& rng,
                                   const std::string& variant) {
  check(k_folds >= 2, "k_folds must be >= 2");
  const std::vector<int> folds = fold_assignment(static_cast<int>(scored.size()), k_folds, rng);
  return best_threshold_accuracy_with_folds(scored, folds, k_folds, variant);
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
  check(a.size() == b.size(), "pearson_r needs equal-length inputs");
  check(a.size() >= 2, "pearson_r needs at least 2 points");
  const auto [a_min, a_max] = std::minmax_element(a.begin(), a.end());
  const auto [b_min, b_max] = std::minmax_element(b.begin(), b.end());
  check(*a_min != *a_max && *b_min != *b_max,
        "pearson_r undefined for constant input");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  return cov / std::sqrt(va * vb);
}

std::vector<ScoredPair> score_pairs_xcos(const XcosModel& model,
                                         const std::vector<Tensor>& images,
                                         const std::vector<PairRecord>& pairs,
                                         AttentionVariant variant) {
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  for (const PairRecord& pair : pairs) {
    const XcosScore s = model.score(images[static_cast<size_t>(pair.index_a)],
                                    images[static_cast<size_t>(pair.index_b)], variant);
    out.push_back({s.value, pair.label, pair.index_a, pair.index_b});
  }
  return out;
}

std::vector<ScoredPair> score_pairs_teacher(const TeacherModel& teacher,
                                            const std::vector<Tensor>& images,
                                            const std::vector<PairRecord>& pairs) {
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  for (const PairRecord& pair : pairs) {
    const double s = teacher_score(teacher, images[static_cast<size_t>(pair.index_a)],
                                   images[static_cast<size_t>(pair.index_b)]);
    out.push_back({s, pair.label, pair.index_a, pair.index_b});
  }
  return out;
}

namespace {

std::vector<int> unique_pair_images(const std::vector<PairRecord>& pairs) {
  std::set<int> seen;
  for (const PairRecord& p : pairs) {
    seen.insert(p.index_a);
    seen.insert(p.index_b);
  }
  return std::vector<int>(seen.begin(), seen.end());
}

}  // namespace

std::vector<OcclusionPoint> occlusion_sweep(const XcosModel& model, const TeacherModel& teacher,
                                            const std::vector<Tensor>& images,
                                            const std::vector<PairRecord>& pairs,
                                            const std::vector<double>& coverages,
                                            AttentionVariant variant, int k_folds, Rng& rng) {
  for (double c : coverages) check(c >= 0.0 && c <= 1.0, "coverage must be in [0, 1]");
  check(!pairs.empty(), "occlusion sweep needs at least one pair");

  std::vector<OcclusionPoint> curve;
  for (double coverage : coverages) {
    // Coverage 0 skips masking so the result is bit-identical to a plain run.
    const std::vector<Tensor>* active = &images;
    std::vector<Tensor> masked;
    if (coverage > 0.0) {
      masked = images;
      for (int idx : unique_pair_images(pairs)) {
        const Tensor& img = images[static_cast<size_t>(idx)];
        const OcclusionMask mask = free_form_mask(img.extent(1), img.extent(2), coverage, rng);
        masked[static_cast<size_t>(idx)] = apply_mask(img, mask);
      }
      active = &masked;
    }

    const std::vector<int> folds = fold_assignment(static_cast<int>(pairs.size()), k_folds, rng);
    const EvalReport xcos_report = best_threshold_accuracy_with_folds(
        score_pairs_xcos(model, *active, pairs, variant), folds, k_folds,
        to_string(variant));
    const EvalReport teacher_report = best_threshold_accuracy_with_folds(
        score_pairs_teacher(teacher, *active, pairs), folds, k_folds, "teacher");
    curve.push_back({coverage, xcos_report.accuracy, teacher_report.accuracy});
  }
  return curve;
}

MaskedGridStats masked_grid_similarity(const XcosModel& model,
                                       const std::vector<Tensor>& images,
                                       const std::vector<PairRecord>& positive_pairs,
                                       double coverage, Rng& rng) {
  check(coverage > 0.0 && coverage <= 1.0, "coverage must be in (0, 1]");
  MaskedGridStats stats;
  double masked_sum = 0.0, clear_sum = 0.0;

  std::map<int, OcclusionMask> masks;
  for (int idx : unique_pair_images(positive_pairs)) {
    const Tensor& img = images[static_cast<size_t>(idx)];
    masks.emplace(idx, free_form_mask(img.extent(1), img.extent(2), coverage, rng));
  }

  for (const PairRecord& pair : positive_pairs) {
    check(pair.label, "masked_grid_similarity expects positive pairs");
    const OcclusionMask& mask_a = masks.at(pair.index_a);
    const OcclusionMask& mask_b = masks.at(pair.index_b);
    const Tensor img_a = apply_mask(images[static_cast<size_t>(pair.index_a)], mask_a);
    const Tensor img_b = apply_mask(images[static_cast<size_t>(pair.index_b)], mask_b);
    const GridFeature fa = model.backbone().extract_grid(img_a);
    const GridFeature fb = model.backbone().extract_grid(img_b);
    const Tensor s = ops::grid_cosine_map(fa.values, fb.values);

    const int gh = fa.height(), gw = fa.width();
    const int patch_h = img_a.extent(1) / gh, patch_w = img_a.extent(2) / gw;
    for (int gy = 0; gy < gh; ++gy) {
      for (int gx = 0; gx < gw; ++gx) {
        auto patch_coverage = [&](const OcclusionMask& m) {
          int on = 0;
          for (int y = gy * patch_h; y < (gy + 1) * patch_h; ++y) {
            for (int x = gx * patch_w; x < (gx + 1) * patch_w; ++x) {
              on += m.at(y, x);
            }
          }
          return static_cast<double>(on) / static_cast<double>(patch_h * patch_w);
        };
        const double cov_a = patch_coverage(mask_a);
        const double cov_b = patch_coverage(mask_b);
        const double local = s.at({gy, gx});
        if (std::max(cov_a, cov_b) > 0.5) {
          masked_sum += local;
          ++stats.masked_grids;
        } else if (cov_a == 0.0 && cov_b == 0.0) {
          clear_sum += local;
          ++stats.clear_grids;
        }
      }
    }
  }
  check(stats.masked_grids > 0 && stats.clear_grids > 0,
        "coverage produced no masked or no clear grids to compare");
  stats.mean_masked_similarity = masked_sum / static_cast<double>(stats.masked_grids);
  stats.mean_clear_similarity = clear_sum / static_cast<double>(stats.clear_grids);
  return stats;
}

std::vector<EvalReport> ablation_run(const XcosModel& model,
                                     const std::vector<Tensor>& images,
                                     const std::vector<PairRecord>& eval_pairs,
                                     const std::vector<PairRecord>& calibration_pairs,
                                     int k_folds, Rng& rng) {
  check(model.calibration().has_value(), "ablation needs a calibrated model");

  std::set<std::pair<int, int>> calib;
  for (const PairRecord& p : calibration_pairs) {
    calib.emplace(std::min(p.index_a, p.index_b), std::max(p.index_a, p.index_b));
  }
  for (const PairRecord& p : eval_pairs) {
    check(calib.find({std::min(p.index_a, p.index_b), std::max(p.index_a, p.index_b)}) ==
              calib.end(),
          "evaluation pair (" + std::to_string(p.index_a) + ", " + std::to_string(p.index_b) +
              ") was also used for calibration");
  }

  const AttentionMap correlated = model.calibration()->attention();
  std::vector<ScoredPair> unit_scores, corr_scores, learned_scores;
  for (const PairRecord& pair : eval_pairs) {
    const GridFeature fa =
        model.backbone().extract_grid(images[static_cast<size_t>(pair.index_a)]);
    const GridFeature fb =
        model.backbone().extract_grid(images[static_cast<size_t>(pair.index_b)]);
    const PatchedCosineMap s = patched_cosine_map(fa, fb);
    const AttentionMap u = unit_attention(fa.height(), fa.width());
    const AttentionMap l = model.attention().learned_attention(fa, fb);
    unit_scores.push_back({xcos(s, u).value, pair.label, pair.index_a, pair.index_b});
    corr_scores.push_back({xcos(s, correlated).value, pair.label, pair.index_a, pair.index_b});
    learned_scores.push_back({xcos(s, l).value, pair.label, pair.index_a, pair.index_b});
  }

  const std::vector<int> folds =
      fold_assignment(static_cast<int>(eval_pairs.size()), k_folds, rng);
  return {
      best_threshold_accuracy_with_folds(unit_scores, folds, k_folds, "unit"),
      best_threshold_accuracy_with_folds(corr_scores, folds, k_folds, "correlated"),
      best_threshold_accuracy_with_folds(learned_scores, folds, k_folds, "learned"),
  };
}

}  // namespace xcos
