#include "doctest.h"
#include "oracles.hpp"
#include "xcos/checkpoint.hpp"
#include "xcos/evaluation.hpp"
#include "xcos/explain.hpp"
#include "xcos/training.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

using namespace xcos;
namespace fs = std::filesystem;

namespace {

// 2 identities x 4 images at 14x14: the micro dataset used for gradient and
// determinism checks.
Dataset micro_dataset(uint64_t seed = 3) {
  SynthConfig cfg;
  cfg.identities = 2;
  cfg.images_per_identity = 4;
  cfg.height = cfg.width = 14;
  cfg.intra_class_noise = 0.04;
  cfg.max_translation = 1;
  cfg.rng_seed = seed;
  return synth_identities(cfg);
}

BackboneConfig micro_backbone() {
  BackboneConfig cfg;
  cfg.input_height = cfg.input_width = 14;
  cfg.block_channels = {6};
  cfg.grid_channels = 4;
  return cfg;
}

TeacherConfig micro_teacher_config() {
  TeacherConfig cfg;
  cfg.trunk = micro_backbone();
  cfg.embed_dim = 12;
  return cfg;
}

TrainConfig micro_train_config() {
  TrainConfig cfg;
  cfg.total_epochs = 3;
  cfg.batch_size = 4;
  cfg.pairs_per_batch = 2;
  cfg.lr_drop_epochs = {2};
  cfg.rng_seed = 17;
  return cfg;
}

std::vector<char> param_bytes(const std::vector<NamedParam>& params) {
  std::vector<char> bytes;
  for (const NamedParam& p : params) {
    const char* data = reinterpret_cast<const char*>(p.param->value.data());
    bytes.insert(bytes.end(), data, data + p.param->value.size() * sizeof(double));
  }
  return bytes;
}

}  // namespace

TEST_CASE("degenerate datasets are rejected before training") {
  Dataset data = micro_dataset();
  const TrainConfig cfg = micro_train_config();
  const MarginConfig margin;

  std::vector<int> single_identity = data.indices_of(0);
  CHECK_THROWS_WITH_AS(
      train_teacher(data, single_identity, micro_teacher_config(), cfg, margin),
      doctest::Contains("2 identities"), std::invalid_argument);

  std::vector<int> lonely = data.indices_of(0);
  lonely.push_back(data.indices_of(1)[0]);  // identity 1 has only one image
  CHECK_THROWS_WITH_AS(train_teacher(data, lonely, micro_teacher_config(), cfg, margin),
                       doctest::Contains("at least 2"), std::invalid_argument);
}

TEST_CASE("teacher training reduces the loss and is seed-reproducible") {
  Dataset data = micro_dataset();
  TrainConfig cfg = micro_train_config();
  cfg.total_epochs = 6;
  cfg.lr_drop_epochs = {};
  cfg.base_lr = 3e-3;
  const MarginConfig margin{8.0, 0.2};

  std::vector<EpochMetrics> history;
  TeacherModel teacher = train_teacher(data, data.all_indices(), micro_teacher_config(), cfg,
                                       margin, &history);
  REQUIRE(history.size() == 6);
  CHECK(history.back().mean_l_id < history.front().mean_l_id);

  std::vector<EpochMetrics> history2;
  TeacherModel teacher2 = train_teacher(data, data.all_indices(), micro_teacher_config(), cfg,
                                        margin, &history2);
  CHECK(param_bytes(teacher.named_params()) == param_bytes(teacher2.named_params()));
  CHECK(history.back().mean_l_id == history2.back().mean_l_id);
}

TEST_CASE("teacher scores are symmetric and self-similar") {
  Dataset data = micro_dataset();
  TeacherModel teacher(micro_teacher_config(), 5);
  const std::vector<Tensor> images = normalized_images(data);
  CHECK(teacher_score(teacher, images[0], images[0]) == doctest::Approx(1.0).epsilon(1e-9));
  const double ab = teacher_score(teacher, images[0], images[1]);
  const double ba = teacher_score(teacher, images[1], images[0]);
  CHECK(std::fabs(ab - ba) < 1e-12);
  CHECK(ab >= -1.0);
  CHECK(ab <= 1.0);
}

TEST_CASE("xcos epoch leaves the teacher frozen and is reproducible") {
  Dataset data = micro_dataset();
  TrainConfig cfg = micro_train_config();
  const MarginConfig margin{8.0, 0.2};
  TeacherModel teacher(micro_teacher_config(), 9);
  const std::vector<char> teacher_before = param_bytes(teacher.named_params());

  XcosModel model(micro_backbone(), data.num_identities, 21);
  Rng rng(cfg.rng_seed);
  const EpochMetrics metrics =
      train_xcos_epoch(model, data, data.all_indices(), teacher, cfg, margin, 1, rng);
  CHECK(metrics.mean_l_cos >= 0.0);
  CHECK(std::isfinite(metrics.mean_l_id));
  CHECK(param_bytes(teacher.named_params()) == teacher_before);

  // same seeds, same everything
  XcosModel model2(micro_backbone(), data.num_identities, 21);
  Rng rng2(cfg.rng_seed);
  train_xcos_epoch(model2, data, data.all_indices(), teacher, cfg, margin, 1, rng2);
  CHECK(param_bytes(model.named_params()) == param_bytes(model2.named_params()));
}

TEST_CASE("full xcos training is byte-reproducible across runs") {
  Dataset data = micro_dataset();
  TrainConfig cfg = micro_train_config();
  const MarginConfig margin{8.0, 0.2};
  TeacherModel teacher(micro_teacher_config(), 9);

  XcosModel a(micro_backbone(), data.num_identities, 33);
  XcosModel b(micro_backbone(), data.num_identities, 33);
  train_xcos(a, data, data.all_indices(), teacher, cfg, margin);
  train_xcos(b, data, data.all_indices(), teacher, cfg, margin);
  CHECK(param_bytes(a.named_params()) == param_bytes(b.named_params()));
}

TEST_CASE("lambda zero trains only the pair branch") {
  Dataset data = micro_dataset();
  TrainConfig cfg = micro_train_config();
  cfg.lambda = 0.0;
  const MarginConfig margin{8.0, 0.2};
  TeacherModel teacher(micro_teacher_config(), 9);
  XcosModel model(micro_backbone(), data.num_identities, 21);

  const Tensor classifier_before = model.classifier().rows.value;
  const std::vector<char> backbone_before = param_bytes(model.backbone().named_params());
  Rng rng(cfg.rng_seed);
  train_xcos_epoch(model, data, data.all_indices(), teacher, cfg, margin, 1, rng);

  CHECK(model.classifier().rows.value.entries() == classifier_before.entries());
  CHECK(param_bytes(model.backbone().named_params()) != backbone_before);
}

TEST_CASE("trunk initialization copies the teacher weights") {
  TeacherModel teacher(micro_teacher_config(), 9);
  XcosModel model(micro_backbone(), 2, 21);
  model.init_trunk_from(teacher);
  CHECK(model.backbone().trunk().weights()[0].value.entries() ==
        teacher.trunk().weights()[0].value.entries());
}

TEST_CASE("the full objective passes grad_check on the micro dataset") {
  Dataset data = micro_dataset();
  const MarginConfig margin{8.0, 0.2};
  TeacherModel teacher(micro_teacher_config(), 9);
  XcosModel model(micro_backbone(), data.num_identities, 21);
  const std::vector<Tensor> images = normalized_images(data);

  // fixed micro-batch: all 8 images through the identity branch, 2 pairs
  const std::vector<PairRecord> pairs{{0, 1, true}, {0, 4, false}};
  std::vector<double> targets;
  for (const PairRecord& p : pairs) {
    targets.push_back(teacher_score(teacher, images[static_cast<size_t>(p.index_a)],
                                    images[static_cast<size_t>(p.index_b)]));
  }

  std::vector<Parameter*> params;
  for (NamedParam p : model.named_params()) params.push_back(p.param);

  const double err = grad_check(
      [&] {
        Graph g;
        Graph::NodeId id_loss = -1;
        for (size_t i = 0; i < images.size(); ++i) {
          auto grid = model.backbone().extract_grid_node(g, images[i]);
          auto embedding = g.reshape(grid, {g.value(grid).size()});
          auto cosines = g.row_cosines(embedding, g.param(model.classifier().rows));
          auto loss = margin_softmax_loss(g, cosines, data.images[i].identity_id, margin);
          id_loss = id_loss < 0 ? loss : g.add(id_loss, loss);
        }
        id_loss = g.scale(id_loss, 1.0 / static_cast<double>(images.size()));
        std::vector<Graph::NodeId> scores;
        for (const PairRecord& p : pairs) {
          auto ga = model.backbone().extract_grid_node(g, images[static_cast<size_t>(p.index_a)]);
          auto gb = model.backbone().extract_grid_node(g, images[static_cast<size_t>(p.index_b)]);
          auto s = g.grid_cosine_map(ga, gb);
          auto w = model.attention().attention_node(g, ga, gb);
          scores.push_back(g.frobenius_inner(s, w));
        }
        auto cos_loss = regression_loss(g, scores, targets);
        auto objective = total_loss(g, cos_loss, id_loss, 1.0);
        g.backward(objective);
        return g.value(objective).scalar_value();
      },
      params, 1e-6);
  CHECK(err < 1e-4);
}

TEST_CASE("metrics CSV log appends rows with a single header") {
  const fs::path path = fs::temp_directory_path() / "xcos_test_metrics.csv";
  fs::remove(path);
  append_metrics_csv(path, {1, 1e-3, 2.5, 0.3, 1.25});
  append_metrics_csv(path, {2, 1e-3, 2.1, 0.2, 1.19});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,lr,mean_L_id,mean_L_cos,wall_seconds");
  std::getline(in, line);
  CHECK(line.rfind("1,0.001,2.5,0.3,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("2,", 0) == 0);
  fs::remove(path);
}

TEST_CASE("split_by_identity holds out the trailing images per identity") {
  Dataset data = micro_dataset();
  const SplitIndices split = split_by_identity(data, 1);
  CHECK(split.train.size() == 6);
  CHECK(split.eval.size() == 2);
  for (int idx : split.eval) {
    CHECK(std::find(split.train.begin(), split.train.end(), idx) == split.train.end());
  }
  CHECK_THROWS_AS(split_by_identity(data, 4), std::invalid_argument);
}

TEST_CASE("occlusion sweep at coverage zero equals the unmasked evaluation") {
  Dataset data = micro_dataset(8);
  const std::vector<Tensor> images = normalized_images(data);
  TeacherModel teacher(micro_teacher_config(), 9);
  XcosModel model(micro_backbone(), data.num_identities, 21);

  Rng pair_rng(3);
  const std::vector<PairRecord> pairs = sample_pairs(data, 6, 6, pair_rng);

  Rng sweep_rng(100);
  const std::vector<OcclusionPoint> curve =
      occlusion_sweep(model, teacher, images, pairs, {0.0}, AttentionVariant::learned, 3,
                      sweep_rng);
  REQUIRE(curve.size() == 1);

  Rng direct_rng(100);
  const std::vector<int> folds = fold_assignment(static_cast<int>(pairs.size()), 3, direct_rng);
  const EvalReport direct_x = best_threshold_accuracy_with_folds(
      score_pairs_xcos(model, images, pairs, AttentionVariant::learned), folds, 3, "x");
  const EvalReport direct_t = best_threshold_accuracy_with_folds(
      score_pairs_teacher(teacher, images, pairs), folds, 3, "t");
  CHECK(curve[0].xcos_accuracy == direct_x.accuracy);
  CHECK(curve[0].teacher_accuracy == direct_t.accuracy);
}

TEST_CASE("correlated scoring without a calibration table is rejected") {
  Dataset data = micro_dataset(10);
  const std::vector<Tensor> images = normalized_images(data);
  XcosModel model(micro_backbone(), data.num_identities, 21);
  CHECK_THROWS_WITH_AS(model.score(images[0], images[1], AttentionVariant::correlated),
                       doctest::Contains("calibration"), std::invalid_argument);
  CHECK_NOTHROW(model.score(images[0], images[1], AttentionVariant::unit));
}

TEST_CASE("full occlusion removes all signal") {
  Dataset data = micro_dataset(9);
  const std::vector<Tensor> images = normalized_images(data);
  TeacherModel teacher(micro_teacher_config(), 9);
  XcosModel model(micro_backbone(), data.num_identities, 21);

  Rng pair_rng(4);
  const std::vector<PairRecord> pairs = sample_pairs(data, 6, 6, pair_rng);
  Rng sweep_rng(5);
  const std::vector<OcclusionPoint> curve =
      occlusion_sweep(model, teacher, images, pairs, {1.0}, AttentionVariant::learned, 3,
                      sweep_rng);
  // every image becomes the same gray square, so scores are constant and
  // accuracy falls back to the majority class of each fold
  CHECK(curve[0].xcos_accuracy == doctest::Approx(0.5).epsilon(0.2));
  CHECK(curve[0].teacher_accuracy == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("ablation runs share folds and reject calibration leakage") {
  Dataset data = micro_dataset(12);
  const std::vector<Tensor> images = normalized_images(data);
  XcosModel model(micro_backbone(), data.num_identities, 21);

  CalibrationTable table;
  table.correlations = Tensor({7, 7});
  table.correlations.fill(0.1);
  table.pair_count = 2;
  model.calibration() = table;

  Rng rng(5);
  const std::vector<PairRecord> eval_pairs = sample_pairs(data, 4, 4, rng);
  // pick a calibration pair that the random evaluation set does not contain
  std::vector<PairRecord> calib_pairs;
  for (int a = 0; a < 8 && calib_pairs.empty(); ++a) {
    for (int b = a + 1; b < 8 && calib_pairs.empty(); ++b) {
      bool clash = false;
      for (const PairRecord& p : eval_pairs) {
        if (std::min(p.index_a, p.index_b) == a && std::max(p.index_a, p.index_b) == b) {
          clash = true;
        }
      }
      if (!clash) calib_pairs.push_back({a, b, false});
    }
  }
  REQUIRE(!calib_pairs.empty());

  Rng run_rng(6);
  const std::vector<EvalReport> reports =
      ablation_run(model, images, eval_pairs, calib_pairs, 2, run_rng);
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].variant == "unit");
  CHECK(reports[1].variant == "correlated");
  CHECK(reports[2].variant == "learned");
  for (const EvalReport& r : reports) {
    CHECK(r.positive_pairs == 4);
    CHECK(r.fold_accuracies.size() == 2);
  }

  // overlap triggers the leakage guard
  Rng guard_rng(7);
  const std::vector<PairRecord> overlapping{{eval_pairs[0].index_a, eval_pairs[0].index_b, false}};
  CHECK_THROWS_WITH_AS(ablation_run(model, images, eval_pairs, overlapping, 2, guard_rng),
                       doctest::Contains("calibration"), std::invalid_argument);
}

TEST_CASE("explanation records stay internally consistent") {
  Dataset data = micro_dataset(14);
  const std::vector<Tensor> images = normalized_images(data);
  XcosModel model(micro_backbone(), data.num_identities, 3);

  const ExplanationRecord rec = explain_pair(model, images[0], images[1],
                                             AttentionVariant::learned, 0.4, nullptr, "p0",
                                             "img0", "img1");
  CHECK_NOTHROW(rec.validate_consistency());
  const ExplanationRecord back = ExplanationRecord::from_json(rec.to_json());
  CHECK(back.xcos_value == rec.xcos_value);
  CHECK(back.similarity.entries() == rec.similarity.entries());
  CHECK_NOTHROW(back.validate_consistency());

  ExplanationRecord broken = rec;
  broken.xcos_value += 0.5;
  CHECK_THROWS_AS(broken.validate_consistency(), std::invalid_argument);
}

TEST_CASE("explanation export writes consistent files deterministically") {
  const fs::path dir = fs::temp_directory_path() / "xcos_test_explain";
  fs::remove_all(dir);
  Dataset data = micro_dataset(15);
  const std::vector<Tensor> images = normalized_images(data);
  XcosModel model(micro_backbone(), data.num_identities, 3);
  TeacherModel teacher(micro_teacher_config(), 4);

  const ExplanationRecord rec = explain_pair(model, images[0], images[4],
                                             AttentionVariant::unit, 0.5, &teacher, "pair_x",
                                             "a.png", "b.png");
  export_explanation(rec, dir);
  CHECK(fs::exists(dir / "pair_x.json"));
  CHECK(fs::exists(dir / "pair_x_S.pgm"));
  CHECK(fs::exists(dir / "pair_x_W.pgm"));

  std::ifstream json_in(dir / "pair_x.json");
  nlohmann::json j = nlohmann::json::parse(json_in);
  const ExplanationRecord parsed = ExplanationRecord::from_json(j);
  CHECK_NOTHROW(parsed.validate_consistency());
  CHECK(parsed.teacher_value.has_value());

  // a second export is byte-identical
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  };
  const auto s_before = bytes(dir / "pair_x_S.pgm");
  const auto w_before = bytes(dir / "pair_x_W.pgm");
  export_explanation(rec, dir);
  CHECK(bytes(dir / "pair_x_S.pgm") == s_before);
  CHECK(bytes(dir / "pair_x_W.pgm") == w_before);
  fs::remove_all(dir);
}

TEST_CASE("identical-pair explanation saturates the unit heatmaps") {
  Dataset data = micro_dataset(16);
  const std::vector<Tensor> images = normalized_images(data);
  XcosModel model(micro_backbone(), data.num_identities, 3);
  const fs::path dir = fs::temp_directory_path() / "xcos_test_explain_sat";
  fs::remove_all(dir);

  const ExplanationRecord rec = explain_pair(model, images[0], images[0],
                                             AttentionVariant::unit, 0.5, nullptr, "same",
                                             "a", "a");
  export_explanation(rec, dir);
  std::ifstream in(dir / "same_S.pgm", std::ios::binary);
  std::string header;
  std::getline(in, header);  // P5
  std::getline(in, header);  // dims
  std::getline(in, header);  // maxval
  std::vector<unsigned char> pixels((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
  REQUIRE(pixels.size() == 112u * 112u);
  for (unsigned char p : pixels) CHECK(p == 255);
  fs::remove_all(dir);
}
