#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "modal_attrib/annotations.hpp"
#include "modal_attrib/errors.hpp"
#include "modal_attrib/gbdt.hpp"
#include "modal_attrib/interactions.hpp"
#include "modal_attrib/pipeline.hpp"
#include "modal_attrib/shap.hpp"

namespace py = pybind11;
using namespace modal_attrib;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw SchemaError("expected a 2-d array, got " + std::to_string(a.ndim()) + "-d");
  const auto n = static_cast<std::size_t>(a.shape(0)), p = static_cast<std::size_t>(a.shape(1));
  return Matrix(n, p, std::vector<double>(a.data(), a.data() + n * p));
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw SchemaError("expected a 1-d array");
  return {a.data(), a.data() + a.shape(0)};
}

Array from_vector(const std::vector<double>& v) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Array from_matrix(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

std::vector<std::size_t> default_rows(std::optional<std::vector<std::size_t>> rows, std::size_t n) {
  if (rows) return *rows;
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  return all;
}

}  // namespace

PYBIND11_MODULE(_modal_attrib, m) {
  m.doc() = "Tree ensembles, interventional SHAP and quadrant interaction analysis";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      instance.attr("kind") = e.kind();
      PyErr_SetObject(error.ptr(), instance.ptr());
    }
  });

  py::class_<BoostedModel>(m, "Model")
      .def_readonly("base_score", &BoostedModel::base_score)
      .def_readonly("learning_rate", &BoostedModel::learning_rate)
      .def_readonly("feature_names", &BoostedModel::feature_names)
      .def_property_readonly("n_trees", [](const BoostedModel& b) { return b.trees.size(); })
      .def("predict", [](const BoostedModel& b, const Array& x) {
        return from_vector(predict(b, to_matrix(x)));
      })
      .def("to_json", [](const BoostedModel& b) { return model_to_json(b); })
      .def_static("from_json", [](const std::string& s) { return model_from_json(s); })
      .def("__eq__", [](const BoostedModel& a, const BoostedModel& b) { return a == b; });

  m.def(
      "train",
      [](const Array& x, const Array& y, std::optional<std::vector<std::size_t>> train_rows,
         std::optional<std::vector<std::size_t>> test_rows, std::string preset, std::optional<int> iterations,
         std::optional<double> learning_rate, std::optional<int> max_depth, std::optional<int> min_samples_leaf,
         std::uint64_t seed, std::optional<std::vector<std::string>> feature_names) {
        const auto mat = to_matrix(x);
        const auto target = to_vector(y);
        if (target.size() != mat.rows()) throw SchemaError("x and y have different row counts");
        auto cfg = BoostConfig::preset(preset);
        if (iterations) cfg.iterations = *iterations;
        if (learning_rate) cfg.learning_rate = *learning_rate;
        if (max_depth) cfg.max_depth = *max_depth;
        if (min_samples_leaf) cfg.min_samples_leaf = *min_samples_leaf;
        cfg.seed = seed;
        std::vector<std::string> names;
        if (feature_names) {
          names = *feature_names;
        } else {
          for (std::size_t j = 0; j < mat.cols(); ++j) names.push_back("f" + std::to_string(j));
        }
        const auto tr = default_rows(train_rows, mat.rows());
        const auto te = test_rows.value_or(std::vector<std::size_t>{});
        py::gil_scoped_release release;
        auto result = train(mat, target, tr, te, cfg, std::move(names));
        py::gil_scoped_acquire acquire;
        py::dict report;
        report["rounds_trained"] = result.report.rounds_trained;
        report["best_round"] = result.report.best_round;
        report["stop_reason"] = result.report.stop_reason;
        report["train_rmse"] = result.report.train_rmse;
        report["test_rmse"] = result.report.test_rmse;
        return py::make_tuple(std::move(result.model), report);
      },
      py::arg("x"), py::arg("y"), py::arg("train_rows") = py::none(), py::arg("test_rows") = py::none(),
      py::arg("preset") = "within", py::arg("iterations") = py::none(), py::arg("learning_rate") = py::none(),
      py::arg("max_depth") = py::none(), py::arg("min_samples_leaf") = py::none(), py::arg("seed") = 0,
      py::arg("feature_names") = py::none());

  m.def(
      "shap_values",
      [](const BoostedModel& model, const Array& rows, const Array& background, std::size_t threads) {
        const auto x = to_matrix(rows);
        const Background bg{to_matrix(background), 0};
        ShapOptions o;
        o.threads = threads;
        ShapResult r;
        {
          py::gil_scoped_release release;
          r = shap_values(model, x, bg, {}, o);
        }
        return py::make_tuple(r.base_value, from_matrix(r.phi));
      },
      py::arg("model"), py::arg("rows"), py::arg("background"), py::arg("threads") = 0);

  m.def(
      "shap_interactions",
      [](const BoostedModel& model, const Array& rows, const Array& background, std::size_t threads) {
        const auto x = to_matrix(rows);
        const Background bg{to_matrix(background), 0};
        ShapOptions o;
        o.threads = threads;
        InteractionTensor t;
        {
          py::gil_scoped_release release;
          t = shap_interactions(model, x, bg, {}, o);
        }
        Array out({t.n, t.p, t.p});
        std::copy(t.values.begin(), t.values.end(), out.mutable_data());
        return py::make_tuple(t.base_value, out);
      },
      py::arg("model"), py::arg("rows"), py::arg("background"), py::arg("threads") = 0);

  m.def(
      "brute_force_shap",
      [](const BoostedModel& model, const Array& row, const Array& background) {
        return from_vector(brute_force_shap(model, to_vector(row), Background{to_matrix(background), 0}));
      },
      py::arg("model"), py::arg("row"), py::arg("background"));

  m.def(
      "classify_pattern",
      [](const std::array<double, 4>& betas, std::optional<double> tol) {
        return std::string(to_string(classify_pattern(betas, tol.value_or(default_tolerance(betas)))));
      },
      py::arg("betas"), py::arg("tol") = py::none());
  m.def("default_tolerance", &default_tolerance, py::arg("betas"), py::arg("fraction") = 0.25,
        py::arg("floor") = 0.05);

  m.def(
      "agreement",
      [](const std::string& machine_jsonl, const std::string& human_csv, double threshold) {
        return agreement_to_json(agreement(parse_machine_labels(machine_jsonl), parse_human_labels(human_csv), threshold));
      },
      py::arg("machine_jsonl"), py::arg("human_csv"), py::arg("threshold") = 50.0);
  m.def(
      "mock_annotate", [](const std::string& text, std::uint64_t seed) { return to_json(mock_annotate(text, seed)); },
      py::arg("text"), py::arg("seed") = 0);

  m.def("commands", [] {
    std::vector<std::string> names;
    for (const auto& c : pipeline::commands()) names.push_back(c.name);
    return names;
  });
  m.def(
      "run_json",
      [](const std::string& command, const std::string& config) {
        pipeline::RunResult r;
        {
          py::gil_scoped_release release;
          r = pipeline::run(command, nlohmann::json::parse(config));
        }
        return r.manifest.dump();
      },
      py::arg("command"), py::arg("config"));
  m.def(
      "rerun_json",
      [](const std::filesystem::path& manifest, std::optional<std::filesystem::path> out, bool check) {
        pipeline::RunResult r;
        {
          py::gil_scoped_release release;
          r = pipeline::rerun(manifest, out, check);
        }
        return r.manifest.dump();
      },
      py::arg("manifest"), py::arg("out") = py::none(), py::arg("check") = false);
}
