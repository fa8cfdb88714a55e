#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "dfd/config.hpp"
#include "dfd/error.hpp"
#include "dfd/eval.hpp"
#include "dfd/experiment.hpp"
#include "dfd/frequency.hpp"
#include "dfd/grad_suite.hpp"
#include "dfd/pipeline.hpp"
#include "dfd/synth.hpp"

namespace py = pybind11;
using namespace dfd;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) float array -> Image.
Image to_image(const FloatArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ArgumentError("expected an (H, W) or (H, W, C) array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1);
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

py::array_t<float> from_image(const Image& img) {
  std::vector<py::ssize_t> shape{img.height, img.width};
  if (img.channels != 1) shape.push_back(img.channels);
  py::array_t<float> out(shape);
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

Mask to_mask(const ByteArray& a) {
  if (a.ndim() != 2) throw ArgumentError("expected an (H, W) mask");
  Mask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (py::ssize_t i = 0; i < a.size(); ++i) m.data[static_cast<std::size_t>(i)] = a.data()[i] ? 1 : 0;
  return m;
}

py::array_t<std::uint8_t> from_mask(const Mask& m) {
  py::array_t<std::uint8_t> out({m.height, m.width});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

TrainConfig config_from(const py::dict& overrides) {
  TrainConfig cfg;
  for (const auto& [k, v] : overrides) {
    std::string value;
    if (py::isinstance<py::bool_>(v)) {
      value = v.cast<bool>() ? "true" : "false";
    } else {
      value = py::str(v).cast<std::string>();
    }
    cfg.set(k.cast<std::string>(), value);
  }
  cfg.validate();
  return cfg;
}

py::dict config_dict(const TrainConfig& cfg) {
  py::dict d;
  for (const auto& k : config_keys()) d[py::str(k.name)] = cfg.get(k.name);
  return d;
}

py::dict score_dict(const ScoreResult& r) {
  py::dict d;
  d["map"] = from_image(r.map);
  d["image_score"] = r.image_score;
  if (!r.gaussian.data.empty()) d["gaussian"] = from_image(r.gaussian);
  if (!r.perlin.data.empty()) d["perlin"] = from_image(r.perlin);
  return d;
}

}  // namespace

PYBIND11_MODULE(_dfd, m) {
  m.doc() = "Dual-discriminator few-shot anomaly detection core";
  m.attr("__version__") = kVersion;

  // Registered base first: pybind11 tries the newest translator first.
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<ArgumentError>(m, "ArgumentError", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<MetricError>(m, "MetricError", base);
  py::register_exception<LayoutError>(m, "LayoutError", base);

  // configuration
  m.def("default_config", [] { return config_dict(TrainConfig{}); }, "Default config as a dict of strings.");
  m.def("config", [](const py::dict& overrides) { return config_dict(config_from(overrides)); },
        py::arg("overrides") = py::dict(), "Validated config with overrides applied.");
  m.def("config_keys", [] {
    py::list out;
    for (const auto& k : config_keys()) out.append(py::make_tuple(k.name, k.default_value, k.help, k.published));
    return out;
  });

  // frequency
  m.def("split_frequency", [](const FloatArray& img) {
    const auto p = split_frequency(to_image(img));
    return py::make_tuple(from_image(p.low), from_image(p.high));
  });
  m.def("dft2", [](const FloatArray& img) {
    const auto s = dft2(to_image(img));
    py::array_t<std::complex<double>> out({s.height, s.width});
    auto* d = out.mutable_data();
    for (std::size_t i = 0; i < s.real.size(); ++i) d[i] = {s.real[i], s.imag[i]};
    return out;
  });
  m.def("radial_energy", [](const FloatArray& img) {
    const auto p = radial_energy_of(to_image(img));
    return py::make_tuple(p.radius, p.energy);
  });
  m.def("gray_histogram", [](const FloatArray& img) { return gray_histogram(to_image(img)); });

  // synthesis
  m.def("perlin", [](int h, int w, int period, std::uint64_t seed) {
    const auto f = perlin(h, w, period, seed);
    py::array_t<float> out({h, w});
    std::copy(f.data.begin(), f.data.end(), out.mutable_data());
    return out;
  }, py::arg("height"), py::arg("width"), py::arg("period"), py::arg("seed"));
  m.def("blend_anomaly", [](const FloatArray& img, const FloatArray& tex, const ByteArray& mask, double beta) {
    return from_image(blend_anomaly(to_image(img), to_image(tex), to_mask(mask), beta).image);
  });
  m.def("foreground_mask", [](const FloatArray& img) { return from_mask(foreground_mask(to_image(img))); });

  // metrics
  m.def("auroc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    return auroc(scores, labels);
  });
  m.def("pro", [](const std::vector<FloatArray>& maps, const std::vector<ByteArray>& masks, double limit, int thresholds) {
    std::vector<Image> ms;
    std::vector<Mask> gs;
    for (const auto& a : maps) ms.push_back(to_image(a));
    for (const auto& a : masks) gs.push_back(to_mask(a));
    return pro(ms, gs, ProOptions{limit, thresholds});
  }, py::arg("maps"), py::arg("masks"), py::arg("fpr_limit") = 0.3, py::arg("thresholds") = 200);

  // fixture and end-to-end
  m.def("write_fixture", [](const std::filesystem::path& root, std::uint64_t seed, int size, int train_good,
                            int test_good, int test_defect, std::vector<std::string> categories) {
    FixtureSpec spec;
    spec.seed = seed;
    spec.size = size;
    spec.train_good = train_good;
    spec.test_good = test_good;
    spec.test_defect = test_defect;
    if (!categories.empty()) spec.categories = std::move(categories);
    py::gil_scoped_release release;
    write_fixture(root, spec);
  }, py::arg("root"), py::arg("seed") = 0, py::arg("size") = 64, py::arg("train_good") = 4,
     py::arg("test_good") = 10, py::arg("test_defect") = 10, py::arg("categories") = std::vector<std::string>{});

  py::class_<ModelBundle>(m, "Model")
      .def_property_readonly("config", [](const ModelBundle& b) { return config_dict(b.config); })
      .def_property_readonly("grid", [](const ModelBundle& b) { return py::make_tuple(b.grid_h, b.grid_w); })
      .def("parameter_hash", [](const ModelBundle& b) { return hex64(b.parameter_hash()); })
      .def("score", [](const ModelBundle& b, const FloatArray& img) { return score_dict(score_image(to_image(img), b)); })
      .def("score_set", [](const ModelBundle& b, const std::vector<FloatArray>& imgs) {
        std::vector<Image> v;
        for (const auto& a : imgs) v.push_back(to_image(a));
        py::list out;
        for (const auto& r : score_images(v, b)) out.append(score_dict(r));
        return out;
      })
      .def("save", [](const ModelBundle& b, const std::filesystem::path& dir) { save_model(b, dir); });

  m.def("load_model", [](const std::filesystem::path& dir) { return load_model(dir); });
  m.def("train", [](const std::vector<FloatArray>& shots, const py::dict& overrides) {
    const TrainConfig cfg = config_from(overrides);
    std::vector<Image> imgs;
    for (const auto& a : shots) imgs.push_back(to_image(a));
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(imgs, cfg);
    }
    py::list totals;
    for (const auto& h : r.history) totals.append(h.total);
    return py::make_tuple(std::move(r.model), totals);
  }, py::arg("shots"), py::arg("overrides") = py::dict(),
     "Returns (model, per-step total loss).");
  m.def("run_category", [](const std::filesystem::path& root, const py::dict& overrides) {
    const TrainConfig cfg = config_from(overrides);
    CategoryRun run;
    {
      py::gil_scoped_release release;
      run = run_category(ingest_category(root), cfg);
    }
    py::dict d;
    d["category"] = run.row.category;
    d["auroc_i"] = run.row.auroc_i;
    d["auroc_p"] = run.row.auroc_p;
    d["pro"] = run.row.pro;
    d["seconds"] = run.total_seconds;
    return d;
  }, py::arg("root"), py::arg("overrides") = py::dict());

  m.def("grad_suite", [](bool full, std::uint64_t seed) {
    GradSuiteOptions o = full ? default_net_suite(seed) : GradSuiteOptions{};
    o.seed = seed;
    py::list out;
    for (const auto& e : run_grad_suite(o)) out.append(py::make_tuple(e.name, e.report.max_rel_error, e.report.passed));
    return out;
  }, py::arg("full") = false, py::arg("seed") = 0);
}
