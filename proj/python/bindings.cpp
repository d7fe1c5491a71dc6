#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gwsos/metric.hpp"

namespace py = pybind11;
using namespace gwsos;

namespace {

MetricMeasureSpace make_space(const Eigen::MatrixXd& data, std::optional<Eigen::VectorXd> weights,
                              bool distances) {
  return distances ? MetricMeasureSpace::from_distances(data, std::move(weights))
                   : MetricMeasureSpace::from_points(data, std::move(weights));
}

py::dict certificate_dict(const Certificate& c) {
  py::dict d;
  d["lower_bound"] = c.lower_bound;
  d["upper_bound"] = c.upper_bound;
  d["eig_ratio"] = c.eigenvalue_ratio;
  d["err_ratio"] = c.error_ratio;
  d["solved"] = c.solved;
  d["exact_zero"] = c.exact_zero;
  d["refined"] = c.refined;
  d["coupling"] = Eigen::MatrixXd(c.coupling);
  return d;
}

py::dict result_dict(const SolveResult& r) {
  py::dict d;
  d["objective"] = r.objective;
  d["dual_objective"] = r.dual_objective;
  d["status"] = to_string(r.status);
  d["iterations"] = r.iterations;
  d["primal_residual"] = r.primal_residual;
  d["dual_residual"] = r.dual_residual;
  d["gap"] = r.gap;
  d["time"] = r.wall_time;
  return d;
}

}  // namespace

PYBIND11_MODULE(_gwsos, m) {
  m.doc() = "Moment relaxations for discrete Gromov-Wasserstein problems";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<ToleranceError>(m, "ToleranceError", PyExc_ArithmeticError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_MemoryError);

  py::class_<MetricMeasureSpace>(m, "Space")
      .def(py::init(&make_space), py::arg("data"), py::arg("weights") = py::none(),
           py::arg("distances") = false)
      .def_property_readonly("size", &MetricMeasureSpace::size)
      .def_property_readonly("distances", &MetricMeasureSpace::distances)
      .def_property_readonly("weights", &MetricMeasureSpace::weights)
      .def_property_readonly("warnings", &MetricMeasureSpace::warnings);

  m.def(
      "lower_bound",
      [](const MetricMeasureSpace& x, const MetricMeasureSpace& y, const std::string& hierarchy, int level,
         double p, double q, double tol, std::int64_t max_iter, bool certify_result) {
        const CostTensor cost = build_cost_tensor(x, y, p, q);
        const HierarchyKind kind = parse_hierarchy(hierarchy);
        const ConicProblem prob = build_relaxation(kind, cost, x.weights(), y.weights(), level);
        SolverOptions opt;
        opt.tol = tol;
        opt.max_iter = max_iter;
        SolveResult r;
        {
          py::gil_scoped_release release;
          r = solve(prob, opt);
        }
        py::dict d = result_dict(r);
        if (certify_result) {
          Certificate c;
          {
            py::gil_scoped_release release;
            c = certify(prob, r, cost);
          }
          d["certificate"] = certificate_dict(c);
        }
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("hierarchy") = "first-level", py::arg("level") = 1, py::arg("p") = 2.0,
      py::arg("q") = 1.0, py::arg("tol") = 1e-6, py::arg("max_iter") = 200'000, py::arg("certify") = true);

  m.def(
      "distance",
      [](const MetricMeasureSpace& x, const MetricMeasureSpace& y, double p, double q, double tol) {
        DistanceOptions opt;
        opt.p = p;
        opt.q = q;
        opt.solver.tol = tol;
        DistanceReport r;
        {
          py::gil_scoped_release release;
          r = distortion_distance(x, y, opt);
        }
        py::dict d;
        d["value"] = r.value;
        d["status"] = to_string(r.status);
        d["certificate"] = certificate_dict(r.certificate);
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("p") = 2.0, py::arg("q") = 1.0, py::arg("tol") = 1e-12);

  m.def(
      "oracle",
      [](const MetricMeasureSpace& x, const MetricMeasureSpace& y, double p, double q, std::size_t starts,
         std::uint64_t seed) {
        const CostTensor cost = build_cost_tensor(x, y, p, q);
        OracleResult o;
        {
          py::gil_scoped_release release;
          o = best_oracle(cost, x.weights(), y.weights(), starts, seed);
        }
        py::dict d;
        d["value"] = o.best_value;
        d["coupling"] = Eigen::MatrixXd(o.best_coupling);
        d["method"] = to_string(o.method);
        d["starts"] = o.starts;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("p") = 2.0, py::arg("q") = 1.0, py::arg("starts") = 64,
      py::arg("seed") = 0);

  m.def(
      "triangle",
      [](const MetricMeasureSpace& x, const MetricMeasureSpace& y, const MetricMeasureSpace& z, double tol) {
        DistanceOptions opt;
        opt.solver.tol = tol;
        TriangleReport t;
        {
          py::gil_scoped_release release;
          t = triangle_check(x, y, z, opt);
        }
        py::dict d;
        d["d_xy"] = t.d_xy;
        d["d_yz"] = t.d_yz;
        d["d_xz"] = t.d_xz;
        d["slack"] = t.slack;
        d["pass"] = t.pass;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("z"), py::arg("tol") = 1e-12);
}
