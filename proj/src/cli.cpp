#include "xcos/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "xcos/checkpoint.hpp"
#include "xcos/evaluation.hpp"
#include "xcos/explain.hpp"
#include "xcos/image_io.hpp"
#include "xcos/training.hpp"

namespace xcos {

namespace {

namespace fs = std::filesystem;

// Defaults plus the optional JSON config file; explicit flags win over both.
struct CliConfig {
  BackboneConfig backbone;
  TeacherConfig teacher;
  MarginConfig margin;
  TrainConfig train;
  SynthConfig synth;
  int eval_folds = 10;
  int eval_per_identity = 8;
  bool clip_negative_correlations = false;
  bool backbone_explicit = false;
  bool teacher_explicit = false;
};

// Stride-2 blocks needed to reduce a 7 * 2^k input to the 7x7 grid, with the
// default channel progression 16, 32, 64, 128, ...
std::vector<int> default_block_channels(int input_size) {
  int k = 0, s = input_size;
  while (s > 7 && s % 2 == 0) {
    s /= 2;
    ++k;
  }
  detail::check(s == 7 && k >= 1, "input size " + std::to_string(input_size) +
                                      " is not a power-of-two multiple of 7");
  std::vector<int> channels;
  for (int i = 0; i < k; ++i) channels.push_back(std::min(16 << i, 128));
  return channels;
}

// Fits the configured backbone to the dataset's image size, auto-deriving
// the block stack unless the config file pinned one.
void fit_backbone_to_data(CliConfig& cfg, const Dataset& data) {
  detail::check(!data.images.empty(), "dataset is empty");
  const int size = data.images.front().height;
  detail::check(data.images.front().width == size, "dataset images must be square");
  if (cfg.backbone.input_height != size || !cfg.backbone_explicit) {
    cfg.backbone.input_height = cfg.backbone.input_width = size;
    if (!cfg.backbone_explicit) cfg.backbone.block_channels = default_block_channels(size);
  }
  cfg.backbone.validate();
  if (!cfg.teacher_explicit) {
    const int embed_dim = cfg.teacher.embed_dim;
    cfg.teacher.trunk = cfg.backbone;
    cfg.teacher.embed_dim = embed_dim;
  }
  cfg.teacher.validate();
}

CliConfig load_cli_config(const std::string& path) {
  CliConfig cfg;
  cfg.teacher.trunk = cfg.backbone;
  if (path.empty()) return cfg;

  std::ifstream in(path);
  detail::check(in.good(), "cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    detail::fail("config file " + path + " is not valid JSON: " + e.what());
  }
  if (j.contains("backbone")) {
    cfg.backbone = backbone_config_from_json(j["backbone"]);
    cfg.backbone_explicit = true;
  }
  cfg.teacher.trunk = cfg.backbone;
  if (j.contains("teacher")) {
    const int default_embed = cfg.teacher.embed_dim;
    if (j["teacher"].contains("trunk")) cfg.teacher_explicit = true;
    cfg.teacher = teacher_config_from_json(j["teacher"]);
    if (!j["teacher"].contains("trunk")) cfg.teacher.trunk = cfg.backbone;
    if (!j["teacher"].contains("embed_dim")) cfg.teacher.embed_dim = default_embed;
  }
  if (j.contains("margin")) cfg.margin = margin_config_from_json(j["margin"]);
  if (j.contains("train")) cfg.train = train_config_from_json(j["train"]);
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    if (s.contains("identities")) cfg.synth.identities = s["identities"].get<int>();
    if (s.contains("images_per_identity"))
      cfg.synth.images_per_identity = s["images_per_identity"].get<int>();
    if (s.contains("image_size")) {
      cfg.synth.height = s["image_size"][0].get<int>();
      cfg.synth.width = s["image_size"][1].get<int>();
    }
    if (s.contains("intra_class_noise"))
      cfg.synth.intra_class_noise = s["intra_class_noise"].get<double>();
    if (s.contains("max_translation")) cfg.synth.max_translation = s["max_translation"].get<int>();
    if (s.contains("rng_seed")) cfg.synth.rng_seed = s["rng_seed"].get<uint64_t>();
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    if (e.contains("folds")) cfg.eval_folds = e["folds"].get<int>();
    if (e.contains("eval_images_per_identity"))
      cfg.eval_per_identity = e["eval_images_per_identity"].get<int>();
  }
  if (j.contains("metric") && j["metric"].contains("clip_negative_correlations")) {
    cfg.clip_negative_correlations = j["metric"]["clip_negative_correlations"].get<bool>();
  }
  return cfg;
}

Tensor load_normalized(const fs::path& path) { return normalize(read_image(path)); }

XcosModel load_xcos(const std::string& path) { return xcos_model_from_state(load_checkpoint(path)); }

TeacherModel load_teacher(const std::string& path) {
  return teacher_from_state(load_checkpoint(path));
}

struct CommonArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& common) {
  cmd->add_option("--config", common.config_path, "JSON config file");
  cmd->add_option("--seed", common.seed, "override the RNG seed");
  cmd->add_option("--out", common.out, "output path");
}

int run_synth_data(const CommonArgs& common, int identities, int images, int size, double noise,
                   int translation) {
  detail::check(!common.out.empty(), "synth-data requires --out <directory>");
  CliConfig cfg = load_cli_config(common.config_path);
  if (identities > 0) cfg.synth.identities = identities;
  if (images > 0) cfg.synth.images_per_identity = images;
  if (size > 0) cfg.synth.height = cfg.synth.width = size;
  if (noise >= 0.0) cfg.synth.intra_class_noise = noise;
  if (translation >= 0) cfg.synth.max_translation = translation;
  if (common.seed) cfg.synth.rng_seed = *common.seed;

  const Dataset data = synth_identities(cfg.synth);
  save_dataset(data, common.out);
  std::cout << "wrote " << data.images.size() << " images for " << data.num_identities
            << " identities to " << common.out << "\n";
  return 0;
}

int run_train_teacher(const CommonArgs& common, const std::string& data_dir,
                      const std::string& log_path) {
  detail::check(!common.out.empty(), "train-teacher requires --out <checkpoint>");
  CliConfig cfg = load_cli_config(common.config_path);
  if (common.seed) cfg.train.rng_seed = *common.seed;

  const Dataset data = load_dataset(data_dir);
  fit_backbone_to_data(cfg, data);

  std::vector<EpochMetrics> history;
  const fs::path log_file = log_path;
  TeacherModel teacher = train_teacher(data, data.all_indices(), cfg.teacher, cfg.train,
                                       cfg.margin, &history,
                                       log_path.empty() ? nullptr : &log_file);
  ModelState state = teacher_state(teacher, cfg.train, cfg.margin);
  save_checkpoint(state, common.out);
  std::cout << "teacher trained for " << history.size() << " epochs, final mean L_id "
            << history.back().mean_l_id << "\n"
            << "checkpoint written to " << common.out << "\n";
  return 0;
}

int run_train_xcos(const CommonArgs& common, const std::string& data_dir,
                   const std::string& teacher_path, const std::string& log_path,
                   bool init_from_teacher) {
  detail::check(!common.out.empty(), "train-xcos requires --out <checkpoint>");
  CliConfig cfg = load_cli_config(common.config_path);
  if (common.seed) cfg.train.rng_seed = *common.seed;
  if (init_from_teacher) cfg.train.init_from_teacher = true;

  const Dataset data = load_dataset(data_dir);
  fit_backbone_to_data(cfg, data);

  const TeacherModel teacher = load_teacher(teacher_path);
  Rng init_rng(cfg.train.rng_seed);
  XcosModel model(cfg.backbone, data.num_identities, init_rng.next_u64());

  const fs::path log_file = log_path;
  const std::vector<EpochMetrics> history =
      train_xcos(model, data, data.all_indices(), teacher, cfg.train, cfg.margin,
                 log_path.empty() ? nullptr : &log_file);
  ModelState state = xcos_model_state(model, cfg.margin, cfg.train);
  save_checkpoint(state, common.out);
  std::cout << "model trained for " << history.size() << " epochs, final mean L_cos "
            << history.back().mean_l_cos << ", mean L_id " << history.back().mean_l_id << "\n"
            << "checkpoint written to " << common.out << "\n";
  return 0;
}

int run_calibrate(const CommonArgs& common, const std::string& data_dir,
                  const std::string& model_path, const std::string& teacher_path, int pair_count,
                  const std::string& json_out, int eval_per_identity) {
  detail::check(!common.out.empty(), "calibrate requires --out <checkpoint>");
  CliConfig cli_cfg = load_cli_config(common.config_path);
  if (eval_per_identity >= 0) cli_cfg.eval_per_identity = eval_per_identity;
  ModelState state = load_checkpoint(model_path);
  MarginConfig margin = cli_cfg.margin;
  TrainConfig train = cli_cfg.train;
  XcosModel model = xcos_model_from_state(state, &margin, &train);
  TeacherModel teacher = load_teacher(teacher_path);

  const Dataset data = load_dataset(data_dir);
  const std::vector<Tensor> images = normalized_images(data);
  Rng rng(common.seed.value_or(train.rng_seed + 1));
  const int n_pos = pair_count / 2;
  const int n_neg = pair_count - n_pos;
  // Calibration pairs come from the training split so later held-out
  // evaluations stay disjoint.
  const SplitIndices split = split_by_identity(data, cli_cfg.eval_per_identity);
  const std::vector<PairRecord> pairs = sample_pairs(data, split.train, n_pos, n_neg, rng);

  const std::vector<CalibrationSample> samples =
      collect_calibration_samples(model, teacher, images, pairs);
  CalibrationTable table =
      correlated_attention(samples, parameter_fingerprint(teacher.named_params()));
  for (const PairRecord& p : pairs) table.pair_indices.emplace_back(p.index_a, p.index_b);
  model.calibration() = table;

  ModelState updated = xcos_model_state(model, margin, train);
  save_checkpoint(updated, common.out);
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    detail::check(out.good(), "cannot write " + json_out);
    out << table.to_json().dump(2) << "\n";
  }
  std::cout << "calibrated on " << table.pair_count << " pairs (teacher " << table.teacher_id
            << "), checkpoint written to " << common.out << "\n";
  return 0;
}

int run_verify(const CommonArgs& common, const std::string& model_path,
               const std::string& image_a, const std::string& image_b, double threshold,
               const std::string& variant) {
  const XcosModel model = load_xcos(model_path);
  const XcosScore score = model.score(load_normalized(image_a), load_normalized(image_b),
                                      attention_variant_from_string(variant));
  nlohmann::json j;
  j["xcos"] = score.value;
  j["threshold"] = threshold;
  j["decision"] = verify(score, threshold);
  j["attention_variant"] = variant;
  std::cout << j.dump(2) << "\n";
  if (!common.out.empty()) {
    std::ofstream out(common.out);
    detail::check(out.good(), "cannot write " + common.out);
    out << j.dump(2) << "\n";
  }
  return 0;
}

int run_explain(const CommonArgs& common, const std::string& model_path,
                const std::string& teacher_path, const std::string& image_a,
                const std::string& image_b, double threshold, const std::string& variant,
                std::string pair_id, bool clip_correlations) {
  detail::check(!common.out.empty(), "explain requires --out <directory>");
  CliConfig cli_cfg = load_cli_config(common.config_path);
  if (clip_correlations) cli_cfg.clip_negative_correlations = true;
  const XcosModel model = load_xcos(model_path);
  std::optional<TeacherModel> teacher;
  if (!teacher_path.empty()) teacher = load_teacher(teacher_path);
  if (pair_id.empty()) {
    pair_id = fs::path(image_a).stem().string() + "__" + fs::path(image_b).stem().string();
  }
  const AttentionVariant v = attention_variant_from_string(variant);
  const Tensor norm_a = load_normalized(image_a);
  const Tensor norm_b = load_normalized(image_b);

  ExplanationRecord record;
  if (v == AttentionVariant::correlated && cli_cfg.clip_negative_correlations) {
    // Display mode: the correlation table clipped at zero and renormalized;
    // the record's score is recomputed with the same clipped weights so it
    // stays consistent with its own maps.
    detail::check(model.calibration().has_value(),
                  "correlated attention requested but no calibration table is present");
    const GridFeature fa = model.backbone().extract_grid(norm_a);
    const GridFeature fb = model.backbone().extract_grid(norm_b);
    const XcosScore score = xcos(patched_cosine_map(fa, fb), model.calibration()->attention(true));
    record.pair_id = pair_id;
    record.image_a = image_a;
    record.image_b = image_b;
    record.xcos_value = score.value;
    if (teacher) record.teacher_value = teacher_score(*teacher, norm_a, norm_b);
    record.similarity = score.similarity.values;
    record.attention = score.attention.values;
    record.variant = v;
    record.threshold = threshold;
    record.decision = verify(score, threshold);
  } else {
    record = explain_pair(model, norm_a, norm_b, v, threshold, teacher ? &*teacher : nullptr,
                          pair_id, image_a, image_b);
  }
  const fs::path json_path = export_explanation(record, common.out);
  std::cout << "explanation written to " << json_path.string() << "\n";
  return 0;
}

int run_eval(const CommonArgs& common, const std::string& model_path,
             const std::string& data_dir, const std::string& pair_list, int n_pos, int n_neg,
             int folds, const std::string& variant, bool ablation, int eval_per_identity) {
  CliConfig cli_cfg = load_cli_config(common.config_path);
  if (folds > 0) cli_cfg.eval_folds = folds;
  if (eval_per_identity >= 0) cli_cfg.eval_per_identity = eval_per_identity;
  ModelState state = load_checkpoint(model_path);
  const XcosModel model = xcos_model_from_state(state);
  Rng rng(common.seed.value_or(0));

  std::vector<EvalReport> reports;
  if (!pair_list.empty()) {
    std::vector<ScoredPair> scored;
    const std::vector<LoadedPair> pairs = load_pair_list(pair_list);
    detail::check(!pairs.empty(), "pair list " + pair_list + " is empty");
    const AttentionVariant v = attention_variant_from_string(variant);
    for (const LoadedPair& pair : pairs) {
      const XcosScore s = model.score(normalize(pair.image_a), normalize(pair.image_b), v);
      scored.push_back({s.value, pair.label, -1, -1});
    }
    reports.push_back(best_threshold_accuracy(scored, cli_cfg.eval_folds, rng, variant));
  } else {
    detail::check(!data_dir.empty(), "eval requires --data or --pair-list");
    const Dataset data = load_dataset(data_dir);
    const std::vector<Tensor> images = normalized_images(data);
    const SplitIndices split = split_by_identity(data, cli_cfg.eval_per_identity);
    const std::vector<int>& subset = cli_cfg.eval_per_identity > 0 ? split.eval : split.train;
    const std::vector<PairRecord> pairs = sample_pairs(data, subset, n_pos, n_neg, rng);
    if (ablation) {
      detail::check(model.calibration().has_value(),
                    "--ablation needs a calibrated model checkpoint");
      reports = ablation_run(model, images, pairs, [&] {
        std::vector<PairRecord> calib;
        for (const auto& [a, b] : model.calibration()->pair_indices) calib.push_back({a, b, false});
        return calib;
      }(), cli_cfg.eval_folds, rng);
    } else {
      const std::vector<ScoredPair> scored =
          score_pairs_xcos(model, images, pairs, attention_variant_from_string(variant));
      reports.push_back(best_threshold_accuracy(scored, cli_cfg.eval_folds, rng, variant));
    }
  }

  nlohmann::json out_json = nlohmann::json::array();
  for (const EvalReport& report : reports) {
    std::cout << report.table() << "\n";
    out_json.push_back(report.to_json());
  }
  if (!common.out.empty()) {
    std::ofstream out(common.out);
    detail::check(out.good(), "cannot write " + common.out);
    out << out_json.dump(2) << "\n";
  }
  return 0;
}

int run_occlusion_eval(const CommonArgs& common, const std::string& model_path,
                       const std::string& teacher_path, const std::string& data_dir,
                       std::vector<double> coverages, int n_pos, int n_neg, int folds,
                       const std::string& variant, int eval_per_identity) {
  CliConfig cli_cfg = load_cli_config(common.config_path);
  if (eval_per_identity >= 0) cli_cfg.eval_per_identity = eval_per_identity;
  const XcosModel model = load_xcos(model_path);
  const TeacherModel teacher = load_teacher(teacher_path);
  const Dataset data = load_dataset(data_dir);
  const std::vector<Tensor> images = normalized_images(data);
  Rng rng(common.seed.value_or(0));

  const SplitIndices split = split_by_identity(data, cli_cfg.eval_per_identity);
  const std::vector<int>& subset = cli_cfg.eval_per_identity > 0 ? split.eval : split.train;
  const std::vector<PairRecord> pairs = sample_pairs(data, subset, n_pos, n_neg, rng);

  if (coverages.empty()) coverages = {0.0, 0.1, 0.3};
  const std::vector<OcclusionPoint> curve =
      occlusion_sweep(model, teacher, images, pairs, coverages,
                      attention_variant_from_string(variant), folds > 0 ? folds : 5, rng);

  nlohmann::json j = nlohmann::json::array();
  std::cout << "coverage  xcos_accuracy  teacher_accuracy\n";
  for (const OcclusionPoint& p : curve) {
    std::printf("%-9.2f %-14.4f %-14.4f\n", p.coverage, p.xcos_accuracy, p.teacher_accuracy);
    j.push_back({{"coverage", p.coverage},
                 {"xcos_accuracy", p.xcos_accuracy},
                 {"teacher_accuracy", p.teacher_accuracy}});
  }
  if (!common.out.empty()) {
    std::ofstream out(common.out);
    detail::check(out.good(), "cannot write " + common.out);
    out << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int cmd_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"explainable patch-cosine face verification"};
  app.require_subcommand(1);

  // synth-data
  CommonArgs synth_common;
  int synth_identities_n = -1, synth_images = -1, synth_size = -1, synth_translation = -1;
  double synth_noise = -1.0;
  CLI::App* synth = app.add_subcommand("synth-data", "generate a synthetic identity dataset");
  add_common(synth, synth_common);
  synth->get_option("--out")->required();
  synth->add_option("--identities", synth_identities_n, "number of identities");
  synth->add_option("--images-per-identity", synth_images, "images per identity");
  synth->add_option("--size", synth_size, "square image size in pixels");
  synth->add_option("--noise", synth_noise, "intra-class noise fraction");
  synth->add_option("--max-translation", synth_translation, "max per-image shift in pixels");

  // train-teacher
  CommonArgs teacher_common;
  std::string teacher_data, teacher_log;
  CLI::App* tteacher = app.add_subcommand("train-teacher", "train the reference model");
  add_common(tteacher, teacher_common);
  tteacher->get_option("--out")->required();
  tteacher->add_option("--data", teacher_data, "dataset directory")->required();
  tteacher->add_option("--log", teacher_log, "CSV metrics log path");

  // train-xcos
  CommonArgs xcos_common;
  std::string xcos_data, xcos_teacher, xcos_log;
  bool xcos_init_from_teacher = false;
  CLI::App* txcos = app.add_subcommand("train-xcos", "train the verification model");
  add_common(txcos, xcos_common);
  txcos->get_option("--out")->required();
  txcos->add_option("--data", xcos_data, "dataset directory")->required();
  txcos->add_option("--teacher", xcos_teacher, "teacher checkpoint")->required();
  txcos->add_option("--log", xcos_log, "CSV metrics log path");
  txcos->add_flag("--init-from-teacher", xcos_init_from_teacher,
                  "initialize the trunk from the teacher weights");

  // calibrate
  CommonArgs cal_common;
  std::string cal_data, cal_model, cal_teacher, cal_json;
  int cal_pairs = 600;
  CLI::App* calibrate = app.add_subcommand("calibrate", "fit the correlated attention table");
  add_common(calibrate, cal_common);
  calibrate->get_option("--out")->required();
  calibrate->add_option("--data", cal_data, "dataset directory")->required();
  calibrate->add_option("--model", cal_model, "model checkpoint")->required();
  calibrate->add_option("--teacher", cal_teacher, "teacher checkpoint")->required();
  calibrate->add_option("--pairs", cal_pairs, "number of calibration pairs");
  calibrate->add_option("--out-json", cal_json, "also dump the table as JSON");
  int cal_holdout = -1;
  calibrate->add_option("--eval-per-identity", cal_holdout,
                        "images per identity excluded from calibration (0 = none)");

  // verify
  std::string verify_model, verify_a, verify_b, verify_variant = "learned";
  double verify_threshold = 0.0;
  CommonArgs verify_common;
  CLI::App* verify_cmd = app.add_subcommand("verify", "score one image pair");
  add_common(verify_cmd, verify_common);
  verify_cmd->add_option("--model", verify_model, "model checkpoint")->required();
  verify_cmd->add_option("-a,--image-a", verify_a, "first image")->required();
  verify_cmd->add_option("-b,--image-b", verify_b, "second image")->required();
  verify_cmd->add_option("--threshold", verify_threshold, "decision threshold")->required();
  verify_cmd->add_option("--attention", verify_variant, "unit, correlated, or learned");

  // explain
  CommonArgs explain_common;
  std::string explain_model, explain_teacher, explain_a, explain_b, explain_variant = "learned";
  std::string explain_pair_id;
  double explain_threshold = 0.0;
  CLI::App* explain_cmd = app.add_subcommand("explain", "export similarity/attention maps");
  add_common(explain_cmd, explain_common);
  explain_cmd->get_option("--out")->required();
  explain_cmd->add_option("--model", explain_model, "model checkpoint")->required();
  explain_cmd->add_option("--teacher", explain_teacher, "teacher checkpoint (optional)");
  explain_cmd->add_option("-a,--image-a", explain_a, "first image")->required();
  explain_cmd->add_option("-b,--image-b", explain_b, "second image")->required();
  explain_cmd->add_option("--threshold", explain_threshold, "decision threshold")->required();
  explain_cmd->add_option("--attention", explain_variant, "unit, correlated, or learned");
  explain_cmd->add_option("--pair-id", explain_pair_id, "identifier for the output files");
  bool explain_clip = false;
  explain_cmd->add_flag("--clip-correlations", explain_clip,
                        "clip negative correlated weights to zero and renormalize for display");

  // eval
  CommonArgs eval_common;
  std::string eval_model, eval_data, eval_pair_list, eval_variant = "learned";
  int eval_pos = 300, eval_neg = 300, eval_folds_opt = -1, eval_holdout = -1;
  bool eval_ablation = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "k-fold verification accuracy");
  add_common(eval_cmd, eval_common);
  eval_cmd->add_option("--model", eval_model, "model checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory");
  eval_cmd->add_option("--pair-list", eval_pair_list, "TSV pair list file");
  eval_cmd->add_option("--pairs-pos", eval_pos, "positive pairs to sample");
  eval_cmd->add_option("--pairs-neg", eval_neg, "negative pairs to sample");
  eval_cmd->add_option("--folds", eval_folds_opt, "number of folds");
  eval_cmd->add_option("--attention", eval_variant, "unit, correlated, or learned");
  eval_cmd->add_flag("--ablation", eval_ablation, "report unit/correlated/learned side by side");
  eval_cmd->add_option("--eval-per-identity", eval_holdout,
                       "held-out images per identity (0 = use the training split)");

  // occlusion-eval
  CommonArgs occl_common;
  std::string occl_model, occl_teacher, occl_data, occl_variant = "learned";
  std::vector<double> occl_coverages;
  int occl_pos = 300, occl_neg = 300, occl_folds = 5, occl_holdout = -1;
  CLI::App* occl = app.add_subcommand("occlusion-eval", "accuracy under free-form masks");
  add_common(occl, occl_common);
  occl->add_option("--model", occl_model, "model checkpoint")->required();
  occl->add_option("--teacher", occl_teacher, "teacher checkpoint")->required();
  occl->add_option("--data", occl_data, "dataset directory")->required();
  occl->add_option("--coverages", occl_coverages, "mask coverages in [0, 1]")->delimiter(',');
  occl->add_option("--pairs-pos", occl_pos, "positive pairs to sample");
  occl->add_option("--pairs-neg", occl_neg, "negative pairs to sample");
  occl->add_option("--folds", occl_folds, "number of folds");
  occl->add_option("--attention", occl_variant, "unit, correlated, or learned");
  occl->add_option("--eval-per-identity", occl_holdout,
                   "held-out images per identity (0 = use the training split)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (eval_cmd->parsed() && eval_data.empty() && eval_pair_list.empty()) {
      throw CLI::RequiredError("eval: one of --data or --pair-list");
    }
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) {
      return run_synth_data(synth_common, synth_identities_n, synth_images, synth_size,
                            synth_noise, synth_translation);
    }
    if (tteacher->parsed()) return run_train_teacher(teacher_common, teacher_data, teacher_log);
    if (txcos->parsed()) {
      return run_train_xcos(xcos_common, xcos_data, xcos_teacher, xcos_log,
                            xcos_init_from_teacher);
    }
    if (calibrate->parsed()) {
      return run_calibrate(cal_common, cal_data, cal_model, cal_teacher, cal_pairs, cal_json,
                           cal_holdout);
    }
    if (verify_cmd->parsed()) {
      return run_verify(verify_common, verify_model, verify_a, verify_b, verify_threshold,
                        verify_variant);
    }
    if (explain_cmd->parsed()) {
      return run_explain(explain_common, explain_model, explain_teacher, explain_a, explain_b,
                         explain_threshold, explain_variant, explain_pair_id, explain_clip);
    }
    if (eval_cmd->parsed()) {
      return run_eval(eval_common, eval_model, eval_data, eval_pair_list, eval_pos, eval_neg,
                      eval_folds_opt, eval_variant, eval_ablation, eval_holdout);
    }
    if (occl->parsed()) {
      return run_occlusion_eval(occl_common, occl_model, occl_teacher, occl_data, occl_coverages,
                                occl_pos, occl_neg, occl_folds, occl_variant, occl_holdout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "error: no subcommand selected\n" << app.help();
  return 1;
}

}  // namespace xcos
