#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "linf/corpus.hpp"
#include "linf/errors.hpp"
#include "linf/image_io.hpp"
#include "linf/metrics.hpp"
#include "linf/pipeline.hpp"
#include "linf/resample.hpp"
#include "linf/training.hpp"
#include "linf/verify.hpp"

namespace py = pybind11;
using namespace linf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an H x W x 3 array");
  const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
  return Image(h, w, std::vector<double>(a.data(), a.data() + h * w * 3));
}

Array to_array(const Image& img) {
  Array out({img.height(), img.width(), std::size_t{3}});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

std::vector<Image> to_images(const std::vector<Array>& arrays) {
  std::vector<Image> out;
  for (const auto& a : arrays) out.push_back(to_image(a));
  return out;
}

py::dict row_dict(const LogRow& r) {
  py::dict d;
  d["step"] = r.step;
  d["epoch"] = r.epoch;
  d["nll"] = r.nll;
  d["l1"] = r.l1;
  d["total"] = r.total;
  d["lr"] = r.lr;
  d["rejected"] = r.rejected;
  return d;
}

py::bytes checkpoint_bytes(const Checkpoint& c) {
  const auto b = serialize_checkpoint(c);
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  // translators run newest-first, so the base class goes first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("patch_n", &ModelConfig::patch_n)
      .def_readwrite("frequencies", &ModelConfig::frequencies)
      .def_readwrite("flow_layers", &ModelConfig::flow_layers)
      .def_readwrite("conditioner_width", &ModelConfig::conditioner_width)
      .def_readwrite("phase_hidden", &ModelConfig::phase_hidden)
      .def_property(
          "channels", [](const ModelConfig& c) { return c.encoder.channels; },
          [](ModelConfig& c, std::size_t v) { c.encoder.channels = v; })
      .def_property(
          "residual_blocks", [](const ModelConfig& c) { return c.encoder.residual_blocks; },
          [](ModelConfig& c, std::size_t v) { c.encoder.residual_blocks = v; })
      .def_property(
          "weighting", [](const ModelConfig& c) { return to_string(c.weighting); },
          [](ModelConfig& c, const std::string& v) { c.weighting = parse_weighting(v); })
      .def_property_readonly("dim", &ModelConfig::dim);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr_crop", &TrainConfig::lr_crop)
      .def_readwrite("scale_min", &TrainConfig::scale_min)
      .def_readwrite("scale_max", &TrainConfig::scale_max)
      .def_readwrite("pairs_per_image", &TrainConfig::pairs_per_image)
      .def_readwrite("batch", &TrainConfig::batch)
      .def_readwrite("lambda_nll", &TrainConfig::lambda_nll)
      .def_readwrite("lambda_l1", &TrainConfig::lambda_l1)
      .def_readwrite("stage", &TrainConfig::stage)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("steps_per_epoch", &TrainConfig::steps_per_epoch)
      .def_readwrite("halve_at_epochs", &TrainConfig::halve_at_epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("dequant_amplitude", &TrainConfig::dequant_amplitude)
      .def_readwrite("hflip", &TrainConfig::hflip);

  py::class_<LinfModel>(m, "Model")
      .def_static("create", &LinfModel::create, py::arg("config"), py::arg("seed") = 0)
      .def_static(
          "load", [](const std::filesystem::path& p) { return load_checkpoint(p).linf_model(); }, py::arg("path"))
      .def_readonly("config", &LinfModel::config)
      .def_property_readonly("parameter_count", [](const LinfModel& mo) { return mo.params.element_count(); })
      .def(
          "super_resolve",
          [](const LinfModel& mo, const Array& lr, double scale, double tau, std::uint64_t seed,
             const std::string& ensemble) {
            const Image in = to_image(lr);
            SrOptions o;
            o.tau = tau;
            o.seed = seed;
            o.mode = parse_ensemble_mode(ensemble);
            Image out;
            {
              py::gil_scoped_release release;
              out = super_resolve(in, scale, mo, o);
            }
            return to_array(out);
          },
          py::arg("lr"), py::arg("scale"), py::arg("tau") = 0.0, py::arg("seed") = 0, py::arg("ensemble") = "fourier");

  py::class_<Trainer>(m, "Trainer")
      .def(py::init([](const LinfModel& mo, const TrainConfig& cfg, const std::vector<Array>& corpus) {
             return Trainer(mo, cfg, to_images(corpus));
           }),
           py::arg("model"), py::arg("config"), py::arg("corpus"))
      .def(
          "step",
          [](Trainer& t) {
            LogRow r;
            {
              py::gil_scoped_release release;
              r = t.step();
            }
            return row_dict(r);
          })
      .def_property_readonly("steps_done", &Trainer::steps_done)
      .def_property_readonly("finished", &Trainer::finished)
      .def_property_readonly("model", &Trainer::model)
      .def("checkpoint_bytes", [](const Trainer& t) { return checkpoint_bytes(t.checkpoint()); })
      .def("save", [](const Trainer& t, const std::filesystem::path& p) { save_checkpoint(t.checkpoint(), p); });

  m.def(
      "procedural_corpus",
      [](std::size_t count, std::size_t size, std::uint64_t seed) {
        std::vector<Array> out;
        for (const auto& img : procedural_corpus(count, size, seed)) out.push_back(to_array(img));
        return out;
      },
      py::arg("count"), py::arg("size"), py::arg("seed") = 0);
  m.def(
      "bicubic_resample", [](const Array& a, std::size_t h, std::size_t w) { return to_array(bicubic_resample(to_image(a), h, w)); },
      py::arg("image"), py::arg("height"), py::arg("width"));
  m.def(
      "bilinear_upsample",
      [](const Array& a, std::size_t h, std::size_t w) { return to_array(bilinear_upsample(to_image(a), h, w)); },
      py::arg("image"), py::arg("height"), py::arg("width"));
  m.def(
      "psnr", [](const Array& a, const Array& b, bool y) { return psnr(to_image(a), to_image(b), y); }, py::arg("a"),
      py::arg("b"), py::arg("y_channel") = false);
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); });
  m.def("diversity", [](const std::vector<Array>& s) { return diversity(to_images(s)); });
  m.def("read_image", [](const std::filesystem::path& p) { return to_array(read_image(p)); });
  m.def(
      "write_image", [](const Array& a, const std::filesystem::path& p) { write_image(to_image(a), p); }, py::arg("image"),
      py::arg("path"));
  m.def(
      "verify",
      [](const std::string& level, std::uint64_t seed) {
        std::vector<verify::OracleResult> results;
        {
          py::gil_scoped_release release;
          results = verify::run_suite(verify::parse_level(level), seed);
        }
        py::list out;
        for (const auto& r : results) {
          py::dict d;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["detail"] = r.detail;
          d["seconds"] = r.seconds;
          out.append(d);
        }
        return out;
      },
      py::arg("level") = "fast", py::arg("seed") = 0);
}
