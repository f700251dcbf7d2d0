#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "isotower/acceptance.hpp"
#include "isotower/error.hpp"
#include "isotower/flow.hpp"
#include "isotower/rmt_stats.hpp"
#include "isotower/runner.hpp"
#include "isotower/simulation.hpp"

namespace py = pybind11;
using namespace isotower;

namespace {

UpdateCoeffs make_coeffs(const ComplexVec& mu, Complex nu) {
  UpdateCoeffs c;
  c.mu = mu;
  c.nu = nu;
  return c;
}

py::dict report_dict(const SecularSolveReport& r) {
  py::dict d;
  d["angles"] = r.angles;
  d["residual"] = r.residual;
  d["iterations"] = r.iterations;
  d["h"] = r.h;
  return d;
}

py::dict inner_dict(const InnerProductEstimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["method"] = to_string(e.method);
  d["s"] = e.s;
  d["truncation"] = e.truncation;
  d["quadrature"] = e.quadrature;
  d["truncation_bound"] = e.truncation_bound;
  return d;
}

py::dict ks_dict(const KsResult& r) {
  py::dict d;
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["samples"] = r.samples;
  d["mean"] = r.mean;
  d["mean_sigma"] = r.mean_sigma;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral recursion for virtual isometries";

  static py::exception<Error> exc(m, "IsotowerError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = exc;
      py::object inst = err(e.what());
      inst.attr("code") = to_string(e.code());
      PyErr_SetObject(err.ptr(), inst.ptr());
    }
  });

  m.def("build_id", &build_id);

  m.def(
      "secular_function",
      [](double t, const std::vector<double>& angles, const ComplexVec& mu, Complex nu) {
        return secular_function(t, angles, make_coeffs(mu, nu));
      },
      py::arg("t"), py::arg("angles"), py::arg("mu"), py::arg("nu"));

  m.def(
      "solve_secular",
      [](const std::vector<double>& angles, const ComplexVec& mu, Complex nu, double tol) {
        SpectralState s;
        s.n = static_cast<int>(angles.size());
        s.angles = angles;
        return report_dict(solve_secular(s, make_coeffs(mu, nu), tol));
      },
      py::arg("angles"), py::arg("mu"), py::arg("nu"), py::arg("tol") = kDefaultSecularTol);

  m.def(
      "recover_coeffs",
      [](const std::vector<double>& old_angles, const std::vector<double>& new_angles) {
        const RecoveredCoeffs r = recover_coeffs_from_angles(old_angles, new_angles);
        return py::make_tuple(r.mu_abs2, r.nu);
      },
      py::arg("old_angles"), py::arg("new_angles"));

  m.def(
      "sample_spectrum",
      [](std::uint64_t seed, int n, const std::string& mode) { return sample_spectrum(seed, n, sim_mode_from_string(mode)); },
      py::arg("seed"), py::arg("n"), py::arg("mode") = "COEFF");

  py::class_<Trajectory>(m, "Trajectory")
      .def(py::init([](std::uint64_t seed, const std::string& mode, const std::string& vectors, int L,
                       std::vector<int> paths, double tol) {
             TrajectoryOptions o;
             o.seed = seed;
             o.mode = sim_mode_from_string(mode);
             o.vec_mode = vec_mode_from_string(vectors);
             o.L = L;
             o.paths = std::move(paths);
             o.secular_tol = tol;
             return Trajectory(o);
           }),
           py::arg("seed") = 1, py::arg("mode") = "COEFF", py::arg("vectors") = "NONE", py::arg("L") = 0,
           py::arg("paths") = std::vector<int>{}, py::arg("tol") = kDefaultSecularTol)
      .def_property_readonly("n", &Trajectory::n)
      .def_property_readonly("angles", [](const Trajectory& t) { return t.state().angles; })
      .def_property_readonly("vectors", [](const Trajectory& t) { return t.state().vecs; })
      .def("step", [](Trajectory& t) { return report_dict(t.step().report); })
      .def("run_to", &Trajectory::run_to, py::arg("n"))
      .def("dense", [](const Trajectory& t) { return t.dense(); })
      .def("D", [](const Trajectory& t, int k) { return t.path(k).D(); }, py::arg("k"))
      .def("scaled_angle", [](const Trajectory& t, int k) { return scaled_angle(t.state(), k); }, py::arg("k"));

  m.def("kernel_sine", &kernel_sine, py::arg("y"));
  m.def("kernel_finite", &kernel_finite, py::arg("t"), py::arg("n"));
  m.def(
      "rho_r",
      [](const std::vector<double>& pts, const std::string& kernel, int n) {
        return rho_r(pts, kernel == "finite" ? KernelKind::Finite : KernelKind::Sine, n);
      },
      py::arg("points"), py::arg("kernel") = "sine", py::arg("n") = 0);
  m.def("pair_density_sine", &pair_density_sine, py::arg("d"));
  m.def(
      "gap_probability",
      [](int n, double a, double b) {
        const GapProbability g = gap_probability(n, a, b);
        return py::make_tuple(g.probability, g.bound);
      },
      py::arg("n"), py::arg("a"), py::arg("b"));
  m.def(
      "trace_moments",
      [](const std::vector<std::vector<double>>& spectra, int j_max) {
        std::vector<py::tuple> rows;
        for (const auto& r : trace_moments(spectra, j_max)) rows.push_back(py::make_tuple(r.j, r.mean, r.sigma, r.target));
        return rows;
      },
      py::arg("spectra"), py::arg("j_max"));
  m.def(
      "beta_delocalization_test",
      [](const std::vector<double>& x, int n) { return ks_dict(beta_delocalization_test(x, n)); }, py::arg("samples"),
      py::arg("n"));

  m.def(
      "cesaro_inner", [](const std::vector<Complex>& w, const std::vector<Complex>& wp) { return inner_dict(cesaro_inner(w, wp)); },
      py::arg("w"), py::arg("wp"));
  m.def(
      "abel_inner",
      [](const std::vector<Complex>& w, const std::vector<Complex>& wp, double s, long N) {
        return inner_dict(abel_inner(w, wp, s, N));
      },
      py::arg("w"), py::arg("wp"), py::arg("s"), py::arg("N") = 0);
  m.def(
      "holo_inner",
      [](const std::vector<Complex>& w, const std::vector<Complex>& wp, double s, long N, long M) {
        return inner_dict(holo_inner(w, wp, s, N, M));
      },
      py::arg("w"), py::arg("wp"), py::arg("s"), py::arg("N"), py::arg("M"));
  m.def("moving_average_M", &moving_average_M, py::arg("p"), py::arg("lam"));

  m.def("criterion_count", [] { return kCriterionCount; });
  m.def("criterion_name", &criterion_name, py::arg("id"));
  m.def(
      "run_criterion",
      [](int id) {
        CriterionResult r;
        {
          py::gil_scoped_release release;
          r = run_criterion(id, AcceptanceOptions{});
        }
        return py::make_tuple(r.passed, r.detail);
      },
      py::arg("id"));
}
