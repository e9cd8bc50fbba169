#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xcos/checkpoint.hpp"
#include "xcos/evaluation.hpp"
#include "xcos/explain.hpp"
#include "xcos/training.hpp"

namespace py = pybind11;
using namespace xcos;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  std::vector<int> shape;
  for (py::ssize_t d = 0; d < arr.ndim(); ++d) shape.push_back(static_cast<int>(arr.shape(d)));
  std::vector<double> entries(arr.data(), arr.data() + arr.size());
  return Tensor(std::move(shape), std::move(entries));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape;
  for (int d = 0; d < t.rank(); ++d) shape.push_back(t.extent(d));
  py::array_t<double> out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

ImageRecord image_from_array(const py::array_t<uint8_t, py::array::c_style>& arr, int identity) {
  if (arr.ndim() != 3 || arr.shape(2) != 3) {
    throw std::invalid_argument("image array must have shape (H, W, 3)");
  }
  ImageRecord img;
  img.identity_id = identity;
  img.height = static_cast<int>(arr.shape(0));
  img.width = static_cast<int>(arr.shape(1));
  img.pixels.assign(arr.data(), arr.data() + arr.size());
  return img;
}

py::array_t<uint8_t> array_from_image(const ImageRecord& img) {
  py::array_t<uint8_t> out({static_cast<py::ssize_t>(img.height),
                            static_cast<py::ssize_t>(img.width), static_cast<py::ssize_t>(3)});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

// Python-facing bundles: the model plus the config snapshot it was trained
// with, so checkpoints can be written without extra arguments.
struct PyTeacher {
  TeacherModel model;
  TrainConfig train;
  MarginConfig margin;
};

struct PyModel {
  XcosModel model;
  TrainConfig train;
  MarginConfig margin;
};

TrainConfig train_config_from_kwargs(int epochs, int batch_size, int pairs_per_batch,
                                     double base_lr, const std::vector<int>& lr_drops,
                                     double lambda, uint64_t seed, bool init_from_teacher) {
  TrainConfig cfg;
  cfg.total_epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.pairs_per_batch = pairs_per_batch;
  cfg.base_lr = base_lr;
  cfg.lr_drop_epochs = lr_drops;
  cfg.lambda = lambda;
  cfg.rng_seed = seed;
  cfg.init_from_teacher = init_from_teacher;
  cfg.validate();
  return cfg;
}

BackboneConfig backbone_for(const Dataset& data, int grid_channels) {
  detail::check(!data.images.empty(), "dataset is empty");
  const int size = data.images.front().height;
  BackboneConfig cfg;
  cfg.input_height = cfg.input_width = size;
  cfg.block_channels.clear();
  int s = size, i = 0;
  while (s > 7 && s % 2 == 0) {
    cfg.block_channels.push_back(std::min(16 << i, 128));
    s /= 2;
    ++i;
  }
  cfg.grid_channels = grid_channels;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "explainable patch-cosine face verification";

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", [](const Dataset& d) { return d.images.size(); })
      .def_readonly("num_identities", &Dataset::num_identities)
      .def("identity",
           [](const Dataset& d, int i) { return d.images.at(static_cast<size_t>(i)).identity_id; })
      .def("image",
           [](const Dataset& d, int i) { return array_from_image(d.images.at(static_cast<size_t>(i))); })
      .def("save", [](const Dataset& d, const std::string& dir) { save_dataset(d, dir); })
      .def_static("load", [](const std::string& dir) { return load_dataset(dir); });

  m.def(
      "synth_dataset",
      [](int identities, int images_per_identity, int size, double noise, int max_translation,
         uint64_t seed) {
        SynthConfig cfg;
        cfg.identities = identities;
        cfg.images_per_identity = images_per_identity;
        cfg.height = cfg.width = size;
        cfg.intra_class_noise = noise;
        cfg.max_translation = max_translation;
        cfg.rng_seed = seed;
        return synth_identities(cfg);
      },
      py::arg("identities") = 20, py::arg("images_per_identity") = 30, py::arg("size") = 56,
      py::arg("noise") = 0.05, py::arg("max_translation") = 4, py::arg("seed") = 0,
      "Generate the procedural identity dataset.");

  m.def(
      "normalize",
      [](const py::array_t<uint8_t, py::array::c_style>& img) {
        return array_from_tensor(normalize(image_from_array(img, -1)));
      },
      py::arg("image"), "Pixel normalization to channel-major (3, H, W) reals.");

  m.def(
      "free_form_mask",
      [](int height, int width, double coverage, uint64_t seed) {
        Rng rng(seed);
        const OcclusionMask mask = free_form_mask(height, width, coverage, rng);
        py::array_t<bool> out({static_cast<py::ssize_t>(height), static_cast<py::ssize_t>(width)});
        for (size_t i = 0; i < mask.cells.size(); ++i) out.mutable_data()[i] = mask.cells[i] != 0;
        return out;
      },
      py::arg("height"), py::arg("width"), py::arg("coverage"), py::arg("seed") = 0,
      "Brush-stroke occlusion mask covering the requested area fraction.");

  m.def(
      "apply_mask",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& img,
         const py::array_t<bool, py::array::c_style>& mask, double fill) {
        Tensor t = tensor_from_array(img);
        OcclusionMask m2;
        m2.height = static_cast<int>(mask.shape(0));
        m2.width = static_cast<int>(mask.shape(1));
        m2.cells.resize(static_cast<size_t>(m2.height) * m2.width);
        for (size_t i = 0; i < m2.cells.size(); ++i) m2.cells[i] = mask.data()[i] ? 1 : 0;
        return array_from_tensor(apply_mask(t, m2, fill));
      },
      py::arg("image"), py::arg("mask"), py::arg("fill") = 0.0);

  py::class_<PyTeacher>(m, "TeacherModel")
      .def("score",
           [](const PyTeacher& t,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
             return teacher_score(t.model, tensor_from_array(a), tensor_from_array(b));
           },
           py::arg("image_a"), py::arg("image_b"),
           "Global cosine similarity of two normalized images.")
      .def("embed",
           [](const PyTeacher& t,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& img) {
             return array_from_tensor(t.model.embed(tensor_from_array(img)));
           })
      .def("save",
           [](PyTeacher& t, const std::string& path) {
             save_checkpoint(teacher_state(t.model, t.train, t.margin), path);
           })
      .def_static("load", [](const std::string& path) {
        PyTeacher t;
        const ModelState state = load_checkpoint(path);
        t.model = teacher_from_state(state);
        t.margin = margin_config_from_json(state.config.at("margin"));
        t.train = train_config_from_json(state.config.at("train"));
        return t;
      });

  py::class_<PyModel>(m, "XcosModel")
      .def_property_readonly("calibrated",
                             [](const PyModel& m2) { return m2.model.calibration().has_value(); })
      .def("score",
           [](const PyModel& m2,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& b,
              const std::string& attention) {
             const XcosScore s = m2.model.score(tensor_from_array(a), tensor_from_array(b),
                                                attention_variant_from_string(attention));
             return py::make_tuple(s.value, array_from_tensor(s.similarity.values),
                                   array_from_tensor(s.attention.values));
           },
           py::arg("image_a"), py::arg("image_b"), py::arg("attention") = "learned",
           "Returns (score, similarity_map, attention_map) for a normalized image pair.")
      .def("grid",
           [](const PyModel& m2,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& img) {
             return array_from_tensor(m2.model.backbone().extract_grid(tensor_from_array(img)).values);
           },
           "Grid feature (c_F, h_F, w_F) of one normalized image.")
      .def("save",
           [](PyModel& m2, const std::string& path) {
             save_checkpoint(xcos_model_state(m2.model, m2.margin, m2.train), path);
           })
      .def_static("load", [](const std::string& path) {
        PyModel m2;
        m2.model = xcos_model_from_state(load_checkpoint(path), &m2.margin, &m2.train);
        return m2;
      });

  m.def(
      "train_teacher",
      [](const Dataset& data, int epochs, int batch_size, double base_lr,
         const std::vector<int>& lr_drops, uint64_t seed, int embed_dim, double margin_scale,
         double margin) {
        PyTeacher t;
        t.train = train_config_from_kwargs(epochs, batch_size, batch_size / 2, base_lr, lr_drops,
                                           1.0, seed, false);
        t.margin = MarginConfig{margin_scale, margin};
        TeacherConfig cfg;
        cfg.trunk = backbone_for(data, 32);
        cfg.embed_dim = embed_dim;
        t.model = train_teacher(data, data.all_indices(), cfg, t.train, t.margin);
        return t;
      },
      py::arg("dataset"), py::arg("epochs") = 20, py::arg("batch_size") = 32,
      py::arg("base_lr") = 1e-3, py::arg("lr_drops") = std::vector<int>{12, 15, 18},
      py::arg("seed") = 0, py::arg("embed_dim") = 256, py::arg("margin_scale") = 16.0,
      py::arg("margin") = 0.3);

  m.def(
      "train_xcos",
      [](const Dataset& data, const PyTeacher& teacher, int epochs, int batch_size,
         int pairs_per_batch, double base_lr, const std::vector<int>& lr_drops,
         double lambda_weight, uint64_t seed, int grid_channels, bool init_from_teacher,
         double margin_scale, double margin) {
        PyModel out;
        out.train = train_config_from_kwargs(epochs, batch_size, pairs_per_batch, base_lr,
                                             lr_drops, lambda_weight, seed, init_from_teacher);
        out.margin = MarginConfig{margin_scale, margin};
        Rng init_rng(seed);
        out.model = XcosModel(backbone_for(data, grid_channels), data.num_identities,
                              init_rng.next_u64());
        train_xcos(out.model, data, data.all_indices(), teacher.model, out.train, out.margin);
        return out;
      },
      py::arg("dataset"), py::arg("teacher"), py::arg("epochs") = 20, py::arg("batch_size") = 32,
      py::arg("pairs_per_batch") = 16, py::arg("base_lr") = 1e-3,
      py::arg("lr_drops") = std::vector<int>{12, 15, 18}, py::arg("lambda_weight") = 1.0,
      py::arg("seed") = 0, py::arg("grid_channels") = 32, py::arg("init_from_teacher") = false,
      py::arg("margin_scale") = 16.0, py::arg("margin") = 0.3);

  m.def(
      "calibrate",
      [](PyModel& model, PyTeacher& teacher, const Dataset& data, int pairs,
         uint64_t seed) {
        Rng rng(seed);
        const std::vector<PairRecord> records = sample_pairs(data, pairs / 2, pairs - pairs / 2,
                                                             rng);
        const std::vector<Tensor> images = normalized_images(data);
        CalibrationTable table = correlated_attention(
            collect_calibration_samples(model.model, teacher.model, images, records),
            parameter_fingerprint(teacher.model.named_params()));
        for (const PairRecord& p : records) table.pair_indices.emplace_back(p.index_a, p.index_b);
        model.model.calibration() = table;
        return array_from_tensor(table.correlations);
      },
      py::arg("model"), py::arg("teacher"), py::arg("dataset"), py::arg("pairs") = 600,
      py::arg("seed") = 0, "Fit the correlated attention table; returns the correlations.");

  m.def(
      "best_threshold_accuracy",
      [](const std::vector<double>& scores, const std::vector<bool>& labels, int folds,
         uint64_t seed) {
        detail::check(scores.size() == labels.size(), "scores and labels differ in length");
        std::vector<ScoredPair> scored;
        for (size_t i = 0; i < scores.size(); ++i) {
          scored.push_back({scores[i], labels[i], static_cast<int>(i), -1});
        }
        Rng rng(seed);
        const EvalReport report = best_threshold_accuracy(scored, folds, rng, "scores");
        py::dict out;
        out["accuracy"] = report.accuracy;
        out["fold_accuracies"] = report.fold_accuracies;
        out["fold_thresholds"] = report.fold_thresholds;
        return out;
      },
      py::arg("scores"), py::arg("labels"), py::arg("folds") = 10, py::arg("seed") = 0);

  m.def(
      "pearson_r",
      [](const std::vector<double>& a, const std::vector<double>& b) { return pearson_r(a, b); },
      py::arg("a"), py::arg("b"));

  m.attr("__version__") = "0.1.0";
}
