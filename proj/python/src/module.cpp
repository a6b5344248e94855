#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wnls/dynamics.hpp"
#include "wnls/experiments.hpp"
#include "wnls/gibbs.hpp"
#include "wnls/wick.hpp"

namespace py = pybind11;
using namespace wnls;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

// Fields cross the boundary as (side, side) arrays indexed by (kx + K, ky + K).
CArray to_array(const SpectralField& u) {
  CArray a({u.side(), u.side()});
  std::copy(u.data().begin(), u.data().end(), a.mutable_data());
  return a;
}

SpectralField from_array(int N, const CArray& a) {
  SpectralField u(N);
  if (a.ndim() != 2 || a.shape(0) != u.side() || a.shape(1) != u.side())
    throw std::invalid_argument("expected a (" + std::to_string(u.side()) + ", " + std::to_string(u.side()) +
                                ") array for cutoff " + std::to_string(N));
  std::copy(a.data(), a.data() + a.size(), u.data().begin());
  // Re-projecting drops anything stored outside the disc.
  return project(u, N);
}

py::dict trajectory_dict(const Trajectory& tr) {
  py::dict d;
  d["times"] = tr.times;
  d["mass"] = tr.mass;
  d["energy"] = tr.energy;
  py::list states;
  for (const auto& s : tr.states) states.append(to_array(s));
  d["states"] = states;
  d["warnings"] = tr.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_wnls, m) {
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalAbort>(m, "NumericalAbort", PyExc_ArithmeticError);

  m.def("sigma", &sigma, py::arg("N"));
  m.def("c_rl", &c_rl, py::arg("r"), py::arg("l"));
  m.def("half_width", [](int N) { return SpectralField(N).half_width(); }, py::arg("N"));

  m.def(
      "sample_gff", [](int N, std::uint64_t seed) { return to_array(sample_gff(N, seed).field); }, py::arg("N"),
      py::arg("seed"));
  m.def(
      "mass", [](int N, const CArray& u) { return mass(from_array(N, u)); }, py::arg("N"), py::arg("u"));
  m.def(
      "wick_power",
      [](int N, const CArray& u, int n, double sig) { return to_array(wick_power(from_array(N, u), n, sig)); },
      py::arg("N"), py::arg("u"), py::arg("n"), py::arg("sigma"));
  m.def(
      "hamiltonian", [](int N, int r, const CArray& u) { return hamiltonian(from_array(N, u), WickContext::make(r, N)); },
      py::arg("N"), py::arg("r"), py::arg("u"));
  m.def(
      "gauged_nonlinearity",
      [](int N, int r, const CArray& v, double m_star) {
        return to_array(gauged_nonlinearity(from_array(N, v), WickContext::make(r, N), m_star));
      },
      py::arg("N"), py::arg("r"), py::arg("v"), py::arg("m_star"));

  m.def(
      "evolve",
      [](int N, int r, const CArray& u0, double t1, double dt, const std::string& scheme, bool gauged,
         int save_stride) {
        EvolutionConfig c;
        c.scheme = parse_scheme(scheme);
        c.dt = dt;
        c.t1 = t1;
        c.save_stride = save_stride;
        Trajectory tr;
        {
          py::gil_scoped_release release;
          tr = evolve(from_array(N, u0), WickContext::make(r, N), c, gauged);
        }
        return trajectory_dict(tr);
      },
      py::arg("N"), py::arg("r"), py::arg("u0"), py::arg("t1") = 1.0, py::arg("dt") = 0.0,
      py::arg("scheme") = "ip-rk4", py::arg("gauged") = false, py::arg("save_stride") = 1);

  m.def("experiments", [] {
    std::vector<std::string> names;
    for (const auto& e : experiments()) names.push_back(e.name);
    return names;
  });
  m.def(
      "defaults", [](const std::string& kind) { return find_experiment(kind).defaults.dump(); }, py::arg("kind"));
  m.def(
      "run_experiment",
      [](const std::string& kind, const std::string& params, std::uint64_t seed, const std::string& out_dir,
         int workers) {
        py::gil_scoped_release release;
        return run_experiment(kind, json::parse(params), seed, out_dir, workers).to_json().dump();
      },
      py::arg("kind"), py::arg("params_json"), py::arg("seed"), py::arg("out_dir"), py::arg("workers") = 0);
  m.def(
      "replay",
      [](const std::string& manifest, const std::string& out_dir, int workers) {
        ReplayResult r;
        {
          py::gil_scoped_release release;
          r = replay(manifest, out_dir, workers);
        }
        return py::make_tuple(r.identical, r.mismatched);
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("workers") = 0);
}
