#include "xcos/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

namespace xcos {

using detail::check;

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                                  static_cast<unsigned char>((v >> 8) & 0xff),
                                  static_cast<unsigned char>((v >> 16) & 0xff),
                                  static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  check(in.gcount() == 4, "truncated checkpoint while reading " + what);
  return static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
         (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double get_f64(std::istream& in, const std::string& what) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  check(in.gcount() == 8, "truncated checkpoint while reading " + what);
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(bytes[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

constexpr char kMagic[4] = {'X', 'C', 'O', 'S'};

}  // namespace

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  const std::string config = state.config.dump();
  put_u32(out, static_cast<uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  for (const auto& [name, tensor] : state.params) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<uint32_t>(tensor.rank()));
    for (int axis = 0; axis < tensor.rank(); ++axis) {
      put_u32(out, static_cast<uint32_t>(tensor.extent(axis)));
    }
    for (int i = 0; i < tensor.size(); ++i) put_f64(out, tensor[i]);
  }
  check(out.good(), "failed writing checkpoint " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  check(in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
        "file " + path.string() + " is not a checkpoint (expected magic XCOS)");
  const uint32_t version = get_u32(in, "version");
  check(version == kCheckpointVersion,
        "checkpoint " + path.string() + " has unsupported format_version " +
            std::to_string(version) + " (supported: " + std::to_string(kCheckpointVersion) + ")");

  ModelState state;
  const uint32_t config_len = get_u32(in, "config length");
  std::string config(config_len, '\0');
  in.read(config.data(), config_len);
  check(in.gcount() == static_cast<std::streamsize>(config_len),
        "truncated checkpoint while reading config");
  try {
    state.config = nlohmann::json::parse(config);
  } catch (const nlohmann::json::exception& e) {
    detail::fail("checkpoint " + path.string() + " has invalid config JSON: " + e.what());
  }

  while (true) {
    in.peek();
    if (in.eof()) break;
    const uint32_t name_len = get_u32(in, "parameter name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    check(in.gcount() == static_cast<std::streamsize>(name_len),
          "truncated checkpoint while reading a parameter name");
    const uint32_t rank = get_u32(in, "rank of " + name);
    check(rank <= 8, "parameter " + name + " has implausible rank " + std::to_string(rank));
    std::vector<int> shape;
    size_t count = 1;
    for (uint32_t axis = 0; axis < rank; ++axis) {
      const uint32_t extent = get_u32(in, "extent of " + name);
      check(extent >= 1 && extent <= (1u << 28), "parameter " + name + " has bad extent");
      shape.push_back(static_cast<int>(extent));
      count *= extent;
    }
    std::vector<double> entries(count);
    for (size_t i = 0; i < count; ++i) entries[i] = get_f64(in, "entries of " + name);
    state.params.emplace_back(std::move(name), Tensor(std::move(shape), std::move(entries)));
  }
  return state;
}

nlohmann::json to_json(const BackboneConfig& cfg) {
  return {{"input_size", {cfg.input_height, cfg.input_width}},
          {"block_channels", cfg.block_channels},
          {"grid_channels", cfg.grid_channels}};
}

BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig cfg;
  if (j.contains("input_size")) {
    cfg.input_height = j["input_size"][0].get<int>();
    cfg.input_width = j["input_size"][1].get<int>();
  }
  if (j.contains("block_channels")) cfg.block_channels = j["block_channels"].get<std::vector<int>>();
  if (j.contains("grid_channels")) cfg.grid_channels = j["grid_channels"].get<int>();
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const MarginConfig& cfg) {
  return {{"scale", cfg.scale}, {"margin", cfg.margin}};
}

MarginConfig margin_config_from_json(const nlohmann::json& j) {
  MarginConfig cfg;
  if (j.contains("scale")) cfg.scale = j["scale"].get<double>();
  if (j.contains("margin")) cfg.margin = j["margin"].get<double>();
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"lambda", cfg.lambda},
          {"batch_size", cfg.batch_size},
          {"pairs_per_batch", cfg.pairs_per_batch},
          {"base_lr", cfg.base_lr},
          {"lr_drop_epochs", cfg.lr_drop_epochs},
          {"total_epochs", cfg.total_epochs},
          {"rng_seed", cfg.rng_seed},
          {"init_from_teacher", cfg.init_from_teacher}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  if (j.contains("pairs_per_batch")) cfg.pairs_per_batch = j["pairs_per_batch"].get<int>();
  if (j.contains("base_lr")) cfg.base_lr = j["base_lr"].get<double>();
  if (j.contains("lr_drop_epochs")) cfg.lr_drop_epochs = j["lr_drop_epochs"].get<std::vector<int>>();
  if (j.contains("total_epochs")) cfg.total_epochs = j["total_epochs"].get<int>();
  if (j.contains("rng_seed")) cfg.rng_seed = j["rng_seed"].get<uint64_t>();
  if (j.contains("init_from_teacher")) cfg.init_from_teacher = j["init_from_teacher"].get<bool>();
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const TeacherConfig& cfg) {
  return {{"trunk", to_json(cfg.trunk)}, {"embed_dim", cfg.embed_dim}};
}

TeacherConfig teacher_config_from_json(const nlohmann::json& j) {
  TeacherConfig cfg;
  if (j.contains("trunk")) cfg.trunk = backbone_config_from_json(j["trunk"]);
  if (j.contains("embed_dim")) cfg.embed_dim = j["embed_dim"].get<int>();
  cfg.validate();
  return cfg;
}

std::string parameter_fingerprint(const std::vector<NamedParam>& params) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&hash](const void* data, size_t size) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < size; ++i) {
      hash ^= bytes[i];
      hash *= 0x100000001b3ULL;
    }
  };
  for (const NamedParam& p : params) {
    mix(p.name.data(), p.name.size());
    mix(p.param->value.data(), static_cast<size_t>(p.param->value.size()) * sizeof(double));
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

namespace {

void load_named_into(const ModelState& state, std::vector<NamedParam> targets) {
  std::map<std::string, Parameter*> by_name;
  for (NamedParam& p : targets) by_name[p.name] = p.param;
  size_t found = 0;
  for (const auto& [name, tensor] : state.params) {
    auto it = by_name.find(name);
    if (it == by_name.end()) continue;
    check(tensor.same_shape(it->second->value),
          "checkpoint parameter " + name + " has shape " + tensor.shape_str() +
              " but the config implies " + it->second->value.shape_str());
    it->second->value = tensor;
    it->second->gradient = Tensor::zeros_like(tensor);
    ++found;
  }
  check(found == by_name.size(), "checkpoint is missing " +
                                     std::to_string(by_name.size() - found) +
                                     " expected parameters");
}

}  // namespace

ModelState xcos_model_state(XcosModel& model, const MarginConfig& margin,
                            const TrainConfig& train) {
  ModelState state;
  state.config["kind"] = "xcos";
  state.config["backbone"] = to_json(model.backbone().config());
  state.config["margin"] = to_json(margin);
  state.config["train"] = to_json(train);
  state.config["num_classes"] = model.num_classes();
  for (NamedParam p : model.named_params()) state.params.emplace_back(p.name, p.param->value);
  if (model.calibration().has_value()) {
    const CalibrationTable& table = *model.calibration();
    state.config["calibration"] = {{"pair_count", table.pair_count},
                                   {"teacher_id", table.teacher_id}};
    if (!table.pair_indices.empty()) {
      std::vector<std::vector<int>> pairs;
      for (const auto& [a, b] : table.pair_indices) pairs.push_back({a, b});
      state.config["calibration"]["pair_indices"] = pairs;
    }
    state.params.emplace_back("calibration.correlations", table.correlations);
  }
  return state;
}

XcosModel xcos_model_from_state(const ModelState& state, MarginConfig* margin_out,
                                TrainConfig* train_out) {
  check(state.config.contains("kind") && state.config["kind"] == "xcos",
        "checkpoint does not hold a verification model");
  const BackboneConfig backbone = backbone_config_from_json(state.config.at("backbone"));
  const int num_classes = state.config.at("num_classes").get<int>();
  XcosModel model(backbone, num_classes, 0);
  load_named_into(state, model.named_params());
  if (state.config.contains("calibration")) {
    CalibrationTable table;
    table.pair_count = state.config["calibration"]["pair_count"].get<int>();
    table.teacher_id = state.config["calibration"]["teacher_id"].get<std::string>();
    if (state.config["calibration"].contains("pair_indices")) {
      for (const auto& pair : state.config["calibration"]["pair_indices"]) {
        table.pair_indices.emplace_back(pair[0].get<int>(), pair[1].get<int>());
      }
    }
    bool found = false;
    for (const auto& [name, tensor] : state.params) {
      if (name == "calibration.correlations") {
        check(tensor.rank() == 2 && tensor.extent(0) == backbone.grid_height() &&
                  tensor.extent(1) == backbone.grid_width(),
              "calibration table shape " + tensor.shape_str() + " does not match the grid");
        table.correlations = tensor;
        found = true;
      }
    }
    check(found, "checkpoint declares a calibration table but the tensor is missing");
    model.calibration() = table;
  }
  if (margin_out) *margin_out = margin_config_from_json(state.config.at("margin"));
  if (train_out) *train_out = train_config_from_json(state.config.at("train"));
  return model;
}

ModelState teacher_state(TeacherModel& teacher, const TrainConfig& train,
                         const MarginConfig& margin) {
  ModelState state;
  state.config["kind"] = "teacher";
  state.config["teacher"] = to_json(teacher.config());
  state.config["margin"] = to_json(margin);
  state.config["train"] = to_json(train);
  state.config["fingerprint"] = parameter_fingerprint(teacher.named_params());
  for (NamedParam p : teacher.named_params()) state.params.emplace_back(p.name, p.param->value);
  return state;
}

TeacherModel teacher_from_state(const ModelState& state) {
  check(state.config.contains("kind") && state.config["kind"] == "teacher",
        "checkpoint does not hold a teacher model");
  const TeacherConfig cfg = teacher_config_from_json(state.config.at("teacher"));
  TeacherModel teacher(cfg, 0);
  load_named_into(state, teacher.named_params());
  return teacher;
}

}  // namespace xcos
