#include "scoreflow/diagnostics.hpp"
#include "scoreflow/experiments.hpp"
#include "scoreflow/losses.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

namespace py = pybind11;
using namespace scoreflow;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<Vector> rows_of(const RowMatrix& m) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
  return out;
}

RowMatrix stack(const std::vector<Vector>& states) {
  if (states.empty()) return {};
  RowMatrix out(static_cast<Eigen::Index>(states.size()), states.front().size());
  for (std::size_t i = 0; i < states.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = states[i];
  return out;
}

nlohmann::json to_nlohmann(const py::object& obj) {
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(text);
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

TimeSchedule schedule_of(double T, double t_min, std::size_t steps) {
  return make_schedule(T, t_min, steps);
}

Objective parse_objective(const std::string& name) {
  if (name == "score-matching") return Objective::ScoreMatching;
  if (name == "ddpm") return Objective::Ddpm;
  if (name == "hyvarinen") return Objective::Hyvarinen;
  if (name == "penalized") return Objective::Penalized;
  throw std::invalid_argument("unknown objective: " + name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "scoreflow core bindings";
  m.attr("__version__") = "0.1.0";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<EmpiricalMeasure>(m, "Measure")
      .def(py::init([](const RowMatrix& points, std::vector<double> weights) {
             return EmpiricalMeasure(rows_of(points), weights);
           }),
           py::arg("points"), py::arg("weights") = std::vector<double>{},
           "Atoms as an (n, d) array; weights default to uniform and are renormalized.")
      .def_property_readonly("dim", &EmpiricalMeasure::dim)
      .def("__len__", &EmpiricalMeasure::size)
      .def_property_readonly("points",
                             [](const EmpiricalMeasure& mu) { return RowMatrix(mu.points().transpose()); })
      .def_property_readonly("weights", [](const EmpiricalMeasure& mu) { return Vector(mu.weights()); });

  m.def("lemniscate", &lemniscate_dataset, py::arg("n"), py::arg("half_width") = 1.0,
        py::arg("seed") = 0, "Uniform sample on the lemniscate of Bernoulli.");

  m.def("log_density", &log_density, py::arg("mu"), py::arg("x"), py::arg("t"));
  m.def("empirical_score", &empirical_score, py::arg("mu"), py::arg("x"), py::arg("t"));
  m.def(
      "mean_shift", [](const EmpiricalMeasure& mu, const Vector& x, double t) { return mean_shift(mu, x, t).m; },
      py::arg("mu"), py::arg("x"), py::arg("t"));
  m.def(
      "li_yau_margin",
      [](const EmpiricalMeasure& mu, const Vector& x, double t) {
        return li_yau_margin(ScoreField::empirical(mu), x, t);
      },
      py::arg("mu"), py::arg("x"), py::arg("t"));

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("times", &Trajectory::times)
      .def_property_readonly("states", [](const Trajectory& tr) { return stack(tr.states); })
      .def_property_readonly("terminal", [](const Trajectory& tr) { return tr.terminal(); })
      .def_readonly("epsilon", &Trajectory::epsilon);

  m.def(
      "integrate_ode",
      [](const EmpiricalMeasure& mu, const Vector& x_T, double T, double t_min, std::size_t steps) {
        return integrate_ode(ScoreField::empirical(mu), x_T, schedule_of(T, t_min, steps));
      },
      py::arg("mu"), py::arg("x_T"), py::arg("T") = 1.0, py::arg("t_min") = 1e-3, py::arg("steps") = 100,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "integrate_sde",
      [](const EmpiricalMeasure& mu, const Vector& x_T, double epsilon, Seed seed, double T, double t_min,
         std::size_t steps) {
        return integrate_sde(ScoreField::empirical(mu), x_T, schedule_of(T, t_min, steps), epsilon, seed);
      },
      py::arg("mu"), py::arg("x_T"), py::arg("epsilon"), py::arg("seed"), py::arg("T") = 1.0,
      py::arg("t_min") = 1e-3, py::arg("steps") = 100, py::call_guard<py::gil_scoped_release>());
  m.def(
      "run_ensemble",
      [](const EmpiricalMeasure& mu, std::size_t n, double epsilon, Seed seed, double sigma, double T,
         double t_min, std::size_t steps) {
        EnsembleOptions opts;
        opts.keep_paths = false;
        const auto ens = run_ensemble(ScoreField::empirical(mu), GaussianInit{Vector::Zero(mu.dim()), sigma},
                                      schedule_of(T, t_min, steps), epsilon, n, seed, opts);
        return RowMatrix(ens.terminal_states);
      },
      py::arg("mu"), py::arg("n"), py::arg("epsilon"), py::arg("seed"), py::arg("sigma") = 1.0,
      py::arg("T") = 1.0, py::arg("t_min") = 1e-3, py::arg("steps") = 100,
      py::call_guard<py::gil_scoped_release>(), "Terminal states (n, d) of SDE paths from N(0, sigma^2 I).");

  m.def(
      "neighborhood_mass",
      [](const RowMatrix& states, const EmpiricalMeasure& mu, double delta) {
        return neighborhood_mass(Matrix(states), mu, delta);
      },
      py::arg("states"), py::arg("mu"), py::arg("delta"));
  m.def(
      "fit_rate",
      [](const Trajectory& traj, const Vector& target) {
        const auto fit = fit_rate(traj, target);
        return py::make_tuple(fit.alpha, fit.C);
      },
      py::arg("trajectory"), py::arg("target"), "Least-squares (alpha, C) of |X_t - target| = C t^alpha.");

  m.def(
      "ou_to_heat",
      [](const Vector& x, double tau) {
        const auto p = ou_to_heat(x, tau);
        return py::make_tuple(p.x, p.t);
      },
      py::arg("x"), py::arg("tau"));
  m.def(
      "heat_to_ou",
      [](const Vector& x, double t) {
        const auto p = heat_to_ou(x, t);
        return py::make_tuple(p.x, p.tau);
      },
      py::arg("x"), py::arg("t"));

  m.def(
      "loss",
      [](const EmpiricalMeasure& mu, const std::string& objective, double scale, std::size_t n, Seed seed,
         double T, double lambda) {
        const auto sample = sample_pairs(mu, T, n, seed);
        const auto cand = make_candidate(ScoreField::empirical(mu), ScaleBy{scale});
        LossEstimate est;
        switch (parse_objective(objective)) {
          case Objective::ScoreMatching: est = score_matching_loss(cand, mu, sample); break;
          case Objective::Ddpm: est = ddpm_loss(cand, mu, sample); break;
          case Objective::Hyvarinen: est = hyvarinen_loss(cand, mu, sample); break;
          case Objective::Penalized: est = penalized_loss(cand, mu, lambda, sample); break;
        }
        return to_python(loss_report(est, sample));
      },
      py::arg("mu"), py::arg("objective"), py::arg("scale") = 1.0, py::arg("n") = 10000, py::arg("seed") = 0,
      py::arg("T") = 1.0, py::arg("lam") = 0.0,
      "Monte Carlo loss of the scaled exact score; returns the loss report as a dict.");

  m.def(
      "validate_config",
      [](const py::object& config) {
        const auto rep = experiments::validate(to_nlohmann(config));
        return py::make_tuple(rep.findings, to_python(rep.resolved));
      },
      py::arg("config"), "Returns (findings, resolved config).");
  m.def(
      "run_experiment",
      [](const py::object& config, const std::string& output_dir) {
        const auto cfg = to_nlohmann(config);
        experiments::RunResult res;
        {
          py::gil_scoped_release release;
          res = experiments::run(cfg, output_dir);
        }
        py::list claims;
        for (const auto& c : res.claims) claims.append(to_python(experiments::to_json(c)));
        py::dict out;
        out["exit_code"] = res.exit_code;
        out["claims"] = claims;
        out["findings"] = res.findings;
        out["error"] = res.error;
        return out;
      },
      py::arg("config"), py::arg("output_dir"));
}
