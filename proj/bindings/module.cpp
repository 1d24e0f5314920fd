#include "cellmg/diagnostics.hpp"
#include "cellmg/estimator.hpp"
#include "cellmg/gaussian.hpp"
#include "cellmg/metrics.hpp"
#include "cellmg/robust.hpp"
#include "cellmg/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace cellmg;

namespace {

GroupedData make_grouped(const std::vector<Matrix>& groups) {
  GroupedData data;
  data.groups = groups;
  return data;
}

EstimatorConfig make_config(double alpha, const std::vector<int>& h, double h_fraction,
                            double eps_conv, int max_iter, std::uint64_t seed) {
  EstimatorConfig cfg;
  cfg.alpha = alpha;
  cfg.h = h;
  cfg.h_fraction = h_fraction;
  cfg.eps_conv = eps_conv;
  cfg.max_iter = max_iter;
  cfg.seed = seed;
  return cfg;
}

std::vector<Matrix> sigma_list(const std::vector<SymmetricMatrix>& s) {
  std::vector<Matrix> out;
  out.reserve(s.size());
  for (const auto& m : s) out.push_back(m.get());
  return out;
}

std::vector<SymmetricMatrix> symmetric_list(const std::vector<Matrix>& s) {
  std::vector<SymmetricMatrix> out;
  out.reserve(s.size());
  for (const auto& m : s) out.emplace_back(m);
  return out;
}

struct PySimulation {
  std::vector<Matrix> data;
  std::vector<std::vector<int>> labels;
  Matrix pi;
  std::vector<Vector> mu;
  std::vector<Matrix> sigma;
  std::vector<MaskMatrix> clean_mask;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cellwise-robust multi-group Gaussian mixture modeling";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FactorizationError>(m, "FactorizationError", PyExc_ArithmeticError);

  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("pi", [](const FitResult& f) { return f.params.pi; })
      .def_property_readonly("mu", [](const FitResult& f) { return f.params.mu; })
      .def_property_readonly("sigma", [](const FitResult& f) { return sigma_list(f.params.sigma); })
      .def_property_readonly("sigma_reg",
                             [](const FitResult& f) { return sigma_list(f.params.sigma_reg); })
      .def_property_readonly("target_diag",
                             [](const FitResult& f) { return f.params.reg.target_diag; })
      .def_property_readonly("rho", [](const FitResult& f) { return f.params.reg.rho; })
      .def_property_readonly("kappa", [](const FitResult& f) { return f.params.reg.kappa; })
      .def_property_readonly("mask", [](const FitResult& f) { return f.mask.groups; })
      .def_property_readonly("responsibilities", [](const FitResult& f) { return f.resp.groups; })
      .def_readonly("objective_trace", &FitResult::objective_trace)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("center", &FitResult::center)
      .def_readonly("scale", &FitResult::scale)
      .def_readonly("clamped_penalties", &FitResult::clamped_penalties)
      .def("__repr__", [](const FitResult& f) {
        return "<FitResult groups=" + std::to_string(f.params.n_components()) +
               " iterations=" + std::to_string(f.iterations) +
               (f.converged ? " converged>" : " not-converged>");
      });

  py::class_<PySimulation>(m, "Simulation")
      .def_readonly("data", &PySimulation::data)
      .def_readonly("labels", &PySimulation::labels)
      .def_readonly("pi", &PySimulation::pi)
      .def_readonly("mu", &PySimulation::mu)
      .def_readonly("sigma", &PySimulation::sigma)
      .def_readonly("clean_mask", &PySimulation::clean_mask);

  m.def(
      "fit",
      [](const std::vector<Matrix>& groups, double alpha, const std::vector<int>& h,
         double h_fraction, double eps_conv, int max_iter, std::uint64_t seed) {
        return fit(make_grouped(groups), make_config(alpha, h, h_fraction, eps_conv, max_iter, seed));
      },
      py::arg("groups"), py::arg("alpha") = 0.75, py::arg("h") = std::vector<int>{},
      py::arg("h_fraction") = 0.75, py::arg("eps_conv") = 1e-4, py::arg("max_iter") = 100,
      py::arg("seed") = 1,
      "Fit the cellwise-robust multi-group mixture to a list of per-group data matrices.");

  m.def(
      "simulate",
      [](int n_groups, int p, const std::vector<int>& n_per_group, double pi_diag,
         const std::string& mean_mode, double eps_cell, double gamma_cell, std::uint64_t seed) {
        SimulationConfig cfg;
        cfg.n_groups = n_groups;
        cfg.dim = p;
        cfg.n_per_group = n_per_group;
        cfg.pi_diag = pi_diag;
        if (mean_mode == "zero")
          cfg.mean_mode = SimulationConfig::MeanMode::Zero;
        else if (mean_mode == "c_separated")
          cfg.mean_mode = SimulationConfig::MeanMode::CSeparated;
        else
          throw ValidationError({"mean_mode must be \"zero\" or \"c_separated\""});
        cfg.eps_cell = eps_cell;
        cfg.gamma_cell = gamma_cell;
        cfg.seed = seed;
        auto [data, truth] = simulate_dataset(cfg);
        PySimulation out;
        out.data = std::move(data.groups);
        out.labels = std::move(truth.labels);
        out.pi = std::move(truth.pi);
        out.mu = std::move(truth.mu);
        out.sigma = sigma_list(truth.sigma);
        out.clean_mask = std::move(truth.clean_mask.groups);
        return out;
      },
      py::arg("n_groups") = 2, py::arg("p") = 10, py::arg("n_per_group") = std::vector<int>{},
      py::arg("pi_diag") = 0.9, py::arg("mean_mode") = "zero", py::arg("eps_cell") = 0.0,
      py::arg("gamma_cell") = 6.0, py::arg("seed") = 1,
      "Draw a synthetic multi-group mixture data set with optional cellwise contamination.");

  m.def(
      "residuals",
      [](const std::vector<Matrix>& groups, const FitResult& fit) {
        return residuals(make_grouped(groups), fit).values;
      },
      py::arg("groups"), py::arg("fit"),
      "Standardized cell residuals of the data against a fitted model.");

  m.def(
      "classify",
      [](const FitResult& fit) { return classify(fit).assigned; }, py::arg("fit"),
      "Maximum-probability component per observation (ties keep the original group).");

  m.def(
      "alpha_sweep",
      [](const std::vector<Matrix>& groups, const std::vector<double>& alphas, double h_fraction,
         double eps_conv, int max_iter, std::uint64_t seed) {
        EstimatorConfig cfg = make_config(0.75, {}, h_fraction, eps_conv, max_iter, seed);
        return alpha_sweep(make_grouped(groups), cfg, alphas);
      },
      py::arg("groups"), py::arg("alphas"), py::arg("h_fraction") = 0.75,
      py::arg("eps_conv") = 1e-4, py::arg("max_iter") = 100, py::arg("seed") = 1,
      "Independent fits across a list of alpha values.");

  m.def(
      "kl_divergence",
      [](const Matrix& hat, const Matrix& truth) {
        return kl_divergence(SymmetricMatrix(hat), SymmetricMatrix(truth));
      },
      py::arg("sigma_hat"), py::arg("sigma_true"));

  m.def(
      "kl_mean",
      [](const std::vector<Matrix>& hat, const std::vector<Matrix>& truth) {
        return kl_mean(symmetric_list(hat), symmetric_list(truth));
      },
      py::arg("sigma_hat"), py::arg("sigma_true"));

  m.def("mse_mu", &mse_mu, py::arg("mu_hat"), py::arg("mu_true"));
  m.def("mse_pi", &mse_pi, py::arg("pi_hat"), py::arg("pi_true"));

  m.def(
      "flag_scores",
      [](const std::vector<MaskMatrix>& hat, const std::vector<MaskMatrix>& truth) {
        CellMask a, b;
        a.groups = hat;
        b.groups = truth;
        const FlagScores s = flag_scores(a, b);
        return py::make_tuple(s.precision, s.recall, s.f1);
      },
      py::arg("mask_hat"), py::arg("truth_mask"),
      "Precision, recall, and F1 of flagged cells (flagged = 0).");

  m.def(
      "observed_log_density",
      [](const Vector& x, const Vector& mu, const Matrix& sigma,
         const std::vector<std::uint8_t>& w) {
        return observed_log_density(x, mu, SymmetricMatrix(sigma), ObservedPattern(w));
      },
      py::arg("x"), py::arg("mu"), py::arg("sigma"), py::arg("w"));

  m.def(
      "conditional_moments",
      [](const Vector& x, const Vector& mu, const Matrix& sigma,
         const std::vector<std::uint8_t>& w) {
        const auto cm = conditional_moments(x, mu, SymmetricMatrix(sigma), ObservedPattern(w));
        return py::make_tuple(cm.imputed, cm.cond_cov.get());
      },
      py::arg("x"), py::arg("mu"), py::arg("sigma"), py::arg("w"));

  m.def(
      "condition_number",
      [](const Matrix& sigma) { return condition_number(SymmetricMatrix(sigma)); },
      py::arg("sigma"));

  m.def(
      "univariate_mcd",
      [](const std::vector<double>& values, int h) {
        const auto est = univariate_mcd(values, h);
        return py::make_tuple(est.location, est.scale);
      },
      py::arg("values"), py::arg("h"),
      "Robust (location, scale) from the minimum-variance h-window.");

  m.def("chi2_quantile", &chi2_quantile, py::arg("prob"), py::arg("df"));

  m.def(
      "random_covariance",
      [](int p, std::uint64_t seed) { return random_covariance(p, seed).get(); }, py::arg("p"),
      py::arg("seed"));
}
