#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bpre/errors.hpp"
#include "bpre/expcli.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_bpre, m) {
  m.doc() = "Subcritical branching processes in random environment";
  m.attr("__version__") = bpre::kVersion;

  py::register_exception<bpre::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<bpre::ConditioningStarvation>(m, "ConditioningStarvation", PyExc_RuntimeError);
  py::register_exception<bpre::PopulationCapError>(m, "PopulationCapError", PyExc_RuntimeError);

  m.def(
      "run_json",
      [](const std::string& config) {
        bpre::json j;
        try {
          j = bpre::json::parse(config);
        } catch (const bpre::json::parse_error& e) {
          throw bpre::ValidationError("config", std::string("invalid JSON: ") + e.what());
        }
        bpre::RunReport report;
        {
          py::gil_scoped_release release;
          report = bpre::run(bpre::parse_config(j));
        }
        return bpre::report_to_json(report).dump();
      },
      py::arg("config"), "Run an experiment config (JSON text) and return the report as JSON text.");

  m.def(
      "model_json",
      [](const std::string& model) {
        return bpre::model_to_json(bpre::parse_model(bpre::json::parse(model))).dump();
      },
      py::arg("model"), "Canonical JSON of a model given as JSON text (builtin name or components).");

  m.def(
      "model_hash",
      [](const std::string& model) { return bpre::model_hash(bpre::parse_model(bpre::json::parse(model))); },
      py::arg("model"), "FNV-1a hash of the canonical model JSON.");

  m.def("operation_names", &bpre::operation_names);
}
