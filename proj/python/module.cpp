#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pixeldoc/checkpoint.hpp"
#include "pixeldoc/corpus.hpp"
#include "pixeldoc/errors.hpp"
#include "pixeldoc/pipeline.hpp"
#include "pixeldoc/search.hpp"

namespace py = pybind11;
using namespace pixeldoc;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image to_image(const FloatArray& a) {
  require(a.ndim() == 2 || a.ndim() == 3, ErrorKind::ShapeMismatch, "expected an (H, W) or (H, W, C) array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(h, w, c);
  std::copy(a.data(), a.data() + a.size(), img.data().begin());
  return img;
}

py::array_t<float> to_array(const Image& img) {
  std::vector<py::ssize_t> shape{img.height(), img.width()};
  if (img.channels() > 1) shape.push_back(img.channels());
  py::array_t<float> out(shape);
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

py::array_t<bool> mask_array(const PatchMask& m) {
  py::array_t<bool> out({m.grid().rows, m.grid().cols});
  auto* p = out.mutable_data();
  for (int i = 0; i < m.grid().count(); ++i) p[i] = m[i];
  return out;
}

PatchMask array_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a, int patch_size) {
  require(a.ndim() == 2, ErrorKind::ShapeMismatch, "expected a (rows, cols) mask");
  PatchMask m(PatchGrid{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), patch_size});
  for (py::ssize_t i = 0; i < a.size(); ++i) m.set_flat(static_cast<int>(i), a.data()[i]);
  return m;
}

}  // namespace

PYBIND11_MODULE(_pixeldoc, m) {
  m.doc() = "Synthetic document scans, patch masks, QA metrics and embedding search";
  m.attr("__version__") = "0.3.0";

  static py::exception<Error> error(m, "PixeldocError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def(
      "synth_scan",
      [](std::uint64_t seed, int index, bool degrade) {
        RunConfig cfg;
        cfg.seed = seed;
        cfg.synth.degrade = degrade;
        return to_array(synth_scan(cfg, Toolkit::from_config(cfg), index).scan.pixels);
      },
      py::arg("seed") = 0, py::arg("index") = 0, py::arg("degrade") = true,
      "Synthetic scan `index` of the desk profile as a float32 array in [0, 1].");

  m.def(
      "sample_span_mask",
      [](int rows, int cols, double ratio, bool trim, std::uint64_t seed) {
        SpanMaskConfig cfg;
        cfg.ratio = ratio;
        cfg.trim = trim;
        Rng rng(seed);
        return mask_array(sample_span_mask(PatchGrid{rows, cols, 16}, cfg, rng).mask);
      },
      py::arg("rows") = 23, py::arg("cols") = 23, py::arg("ratio") = 0.28, py::arg("trim") = true,
      py::arg("seed") = 0);

  m.def(
      "boxes_to_mask",
      [](const std::vector<std::array<int, 4>>& boxes, int rows, int cols, int patch_size) {
        std::vector<PixelBox> b;
        for (const auto& [x0, y0, x1, y1] : boxes) b.push_back({x0, y0, x1, y1});
        return mask_array(boxes_to_mask(b, PatchGrid{rows, cols, patch_size}));
      },
      py::arg("boxes"), py::arg("rows"), py::arg("cols"), py::arg("patch_size") = 16,
      "Boxes are (x0, y0, x1, y1) in pixels, half open.");

  m.def(
      "edit_distance", [](const std::string& a, const std::string& b) {
        return edit_distance(decode_utf8(a), decode_utf8(b));
      });

  m.def(
      "fuzzy_locate",
      [](const std::string& answer, const std::vector<std::string>& words, double max_norm_dist) -> py::object {
        std::vector<WordBox> boxes;
        for (const auto& w : words) boxes.push_back({w, {}});
        const auto match = fuzzy_locate(answer, ocr_from_words(boxes), max_norm_dist);
        if (!match) return py::none();
        py::dict d;
        d["first"] = match->first;
        d["last"] = match->last;
        d["distance"] = match->distance;
        d["normalized"] = match->normalized;
        return d;
      },
      py::arg("answer"), py::arg("words"), py::arg("max_norm_dist") = 0.3);

  m.def("crop_count", &crop_count, py::arg("height"), py::arg("window") = 368, py::arg("stride") = 128);
  m.def(
      "sliding_crops",
      [](const FloatArray& strip, int window, int stride) {
        py::list out;
        for (const auto& c : sliding_crops(to_image(strip), window, stride))
          out.append(py::make_tuple(c.offset, to_array(c.scan.pixels)));
        return out;
      },
      py::arg("strip"), py::arg("window") = 368, py::arg("stride") = 128);

  m.def(
      "qa_metrics",
      [](const std::vector<std::vector<float>>& pred,
         const std::vector<py::array_t<bool, py::array::c_style | py::array::forcecast>>& truth, double threshold) {
        std::vector<PatchMask> masks;
        for (const auto& t : truth) masks.push_back(array_mask(t, 16));
        const QAMetrics r = qa_metrics(pred, masks, threshold);
        py::dict d;
        d["binary_acc"] = r.binary_acc;
        d["patch_acc"] = r.patch_acc;
        d["one_overlap"] = r.one_overlap;
        d["n_with_answer"] = r.n_with_answer;
        d["n_without"] = r.n_without;
        return d;
      },
      py::arg("pred"), py::arg("truth"), py::arg("threshold") = 0.5);

  py::class_<ModelParams<float>>(m, "Model")
      .def_static(
          "init", [](std::uint64_t seed) { return ModelParams<float>::init(ModelConfig{}, seed); },
          py::arg("seed") = 0, "Desk-default model with fresh weights.")
      .def_static(
          "load", [](const std::filesystem::path& p) { return load_checkpoint(p); }, py::arg("path"))
      .def("save", [](const ModelParams<float>& p, const std::filesystem::path& path) { save_checkpoint(path, p); })
      .def_property_readonly("parameter_count", [](const ModelParams<float>& p) { return p.size(); })
      .def_property_readonly("width", [](const ModelParams<float>& p) { return p.config.width; })
      .def_property_readonly("image_size", [](const ModelParams<float>& p) { return p.config.image_hw; })
      .def(
          "embed", [](const ModelParams<float>& p, const FloatArray& img) { return embed(p, to_image(img)); },
          py::arg("image"));

  py::class_<EmbeddingIndex>(m, "EmbeddingIndex")
      .def(py::init<int, std::string>(), py::arg("width"), py::arg("fingerprint") = "")
      .def(
          "add", [](EmbeddingIndex& idx, std::string id, const std::vector<float>& v) { idx.add(std::move(id), v); },
          py::arg("id"), py::arg("vector"))
      .def(
          "query",
          [](const EmbeddingIndex& idx, const std::vector<float>& probe, std::size_t k) {
            py::list out;
            for (const auto& h : idx.query(probe, k)) out.append(py::make_tuple(h.id, h.cosine));
            return out;
          },
          py::arg("probe"), py::arg("k") = 10)
      .def("save", &EmbeddingIndex::save, py::arg("path"))
      .def_static("load", &EmbeddingIndex::load, py::arg("path"))
      .def_property_readonly("width", &EmbeddingIndex::width)
      .def_property_readonly("fingerprint", &EmbeddingIndex::fingerprint)
      .def_property_readonly("ids", &EmbeddingIndex::ids)
      .def("__len__", &EmbeddingIndex::size);
}
