#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "conelab/audit.hpp"
#include "conelab/config.hpp"
#include "conelab/experiments.hpp"
#include "conelab/gaussian.hpp"
#include "conelab/localization.hpp"
#include "conelab/spectral.hpp"

namespace py = pybind11;
namespace sc = conelab::scenario;
namespace loc = conelab::localization;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

loc::QuadratureSettings settings(double sigma) {
  loc::QuadratureSettings q;
  q.sigma = sigma;
  return q;
}

}  // namespace

PYBIND11_MODULE(_conelab, m) {
  m.doc() = "Lattice experiments on relativistic locality (C++ core bindings).";

  auto base = py::register_exception<conelab::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<conelab::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<conelab::PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<conelab::ConeVanishedError>(m, "ConeVanishedError", base.ptr());
  py::register_exception<conelab::QuadratureError>(m, "QuadratureError", base.ptr());
  py::register_exception<conelab::InvalidStateError>(m, "InvalidStateError", base.ptr());
  py::register_exception<conelab::InstabilityError>(m, "InstabilityError", base.ptr());
  py::register_exception<conelab::ShapeError>(m, "ShapeError", base.ptr());

  m.def("list_experiments", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (auto e : sc::all_experiments()) out.emplace_back(sc::to_string(e), sc::summary(e));
    return out;
  });

  m.def(
      "validate",
      [](const std::string& text) {
        std::vector<std::pair<std::size_t, std::string>> out;
        try {
          sc::parse_config(text);
        } catch (const sc::ConfigErrors& e) {
          for (const auto& i : e.issues()) out.emplace_back(i.line, i.message);
        }
        return out;
      },
      py::arg("text"), "List of (line, message) problems; empty when the scenario is valid.");

  m.def(
      "parse_config", [](const std::string& text) { return to_py(sc::parse_config(text).to_json()); },
      py::arg("text"), "Resolved scenario as a dict; raises ConfigError listing every problem.");

  m.def(
      "run",
      [](const std::string& text, const std::string& out_dir, std::size_t threads,
         std::optional<std::uint64_t> seed) {
        auto cfg = sc::parse_config(text);
        if (seed) cfg.override_seed(*seed);
        sc::RunOptions opt;
        opt.out_dir = out_dir;
        opt.threads = threads;
        opt.write_artifacts = !out_dir.empty();
        sc::RunReport r;
        {
          py::gil_scoped_release release;
          r = sc::run(cfg, opt);
        }
        auto d = to_py(r.to_json());
        d["exit_code"] = r.exit_code();
        return d;
      },
      py::arg("text"), py::arg("out_dir") = "", py::arg("threads") = 1,
      py::arg("seed_override") = py::none(),
      "Runs a scenario given as text. Artifacts are written only when out_dir is set.");

  m.def("wightman_equal_time",
        [](double r, double mass) { return loc::wightman_equal_time(r, mass); }, py::arg("r"),
        py::arg("mass"));
  m.def(
      "pauli_jordan",
      [](double t, double r, double mass, double sigma) {
        return loc::pauli_jordan(t, r, mass, settings(sigma));
      },
      py::arg("t"), py::arg("r"), py::arg("mass"), py::arg("sigma") = -1.0);
  m.def(
      "nw_overlap",
      [](double t, double r, double mass, double sigma) {
        return loc::nw_overlap(t, r, mass, settings(sigma));
      },
      py::arg("t"), py::arg("r"), py::arg("mass"), py::arg("sigma") = -1.0);

  m.def(
      "leakage_fraction",
      [](py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast> psi,
         double spacing, double center, double radius, double mass, double T) {
        if (psi.ndim() != 1) throw conelab::ShapeError("psi must be one-dimensional");
        const auto g = conelab::make_grid(1, static_cast<std::size_t>(psi.shape(0)), spacing);
        conelab::ComplexField f(g, 1);
        std::copy(psi.data(), psi.data() + psi.shape(0), f.values().begin());
        return conelab::spectral::leakage_fraction(f, conelab::Region::ball(center, radius), mass, T);
      },
      py::arg("psi"), py::arg("spacing"), py::arg("center"), py::arg("radius"), py::arg("mass"),
      py::arg("T"), "Fraction of |psi|^2 outside the light-cone dilation after sqrt-KG evolution.");

  m.def(
      "chain_entropy",
      [](std::size_t n, double mass, std::vector<std::size_t> sites) {
        const auto v = conelab::gaussian::vacuum_state(conelab::gaussian::chain_coupling(n, mass));
        return conelab::gaussian::entropy(conelab::gaussian::reduce(v, std::move(sites))).entropy;
      },
      py::arg("n"), py::arg("mass"), py::arg("sites"),
      "Entanglement entropy of a site set in the vacuum of a periodic harmonic chain.");

  m.def("nonseparability_demo",
        [] { return to_py(conelab::audit::to_json(conelab::audit::nonseparability_demo())); });

  m.attr("__version__") = CONELAB_VERSION;
}
