#include "cellmg/diagnostics.hpp"
#include "cellmg/estimator.hpp"
#include "cellmg/io.hpp"
#include "cellmg/metrics.hpp"
#include "cellmg/simulation.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace cellmg;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io::IoError("cannot create output directory " + dir + ": " + ec.message());
}

EstimatorConfig load_fit_config(const std::string& config_path, const std::optional<std::uint64_t>& seed) {
  EstimatorConfig cfg;
  if (!config_path.empty()) cfg = io::read_fit_config_json(config_path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

void write_fit_outputs(const std::string& out_dir, const GroupedData& data, const FitResult& result) {
  io::ModelFile model{result.params, result.center, result.scale, data.variable_names,
                      data.group_names};
  io::write_model_json(join(out_dir, "model.json"), model);
  io::write_mask_csv(join(out_dir, "mask.csv"), result.mask, data.variable_names);
  io::write_responsibilities_csv(join(out_dir, "responsibilities.csv"), result.resp);
  io::write_residuals_csv(join(out_dir, "residuals.csv"), residuals(data, result),
                          data.variable_names);
  io::write_summary_json(join(out_dir, "summary.json"), result);
}

int run_fit(const std::string& data_path, const std::string& config_path,
            const std::string& out_dir, const std::optional<std::uint64_t>& seed) {
  const GroupedData data = io::read_data_csv(data_path);
  const EstimatorConfig cfg = load_fit_config(config_path, seed);
  const FitResult result = fit(data, cfg);
  if (result.clamped_penalties > 0)
    std::cerr << "warning: " << result.clamped_penalties << " penalty entries clamped to 0\n";

  ensure_out_dir(out_dir);
  write_fit_outputs(out_dir, data, result);
  std::cout << "fit: " << result.iterations << " iterations, "
            << (result.converged ? "converged" : "not converged") << "\n";
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::optional<std::uint64_t>& seed) {
  SimulationConfig cfg = io::read_sim_config_json(config_path);
  if (seed) cfg.seed = *seed;
  auto [data, truth] = simulate_dataset(cfg);
  data.variable_names.clear(); // default v1..vp on write
  ensure_out_dir(out_dir);
  io::write_data_csv(join(out_dir, "data.csv"), data);
  io::write_truth_json(join(out_dir, "truth.json"), truth);
  io::write_mask_csv(join(out_dir, "contamination_mask.csv"), truth.clean_mask, {});
  std::cout << "simulate: " << data.n_groups() << " groups, p=" << data.dim() << "\n";
  return 0;
}

int run_evaluate(const std::string& model_path, const std::string& truth_path,
                 const std::string& mask_path, const std::string& truth_mask_path,
                 const std::string& out_dir) {
  const io::ModelFile model = io::read_model_json(model_path);
  const GroundTruth truth = io::read_truth_json(truth_path);

  io::MetricsReport report;
  report.kl_per_component.reserve(model.params.sigma_reg.size());
  for (std::size_t k = 0; k < model.params.sigma_reg.size(); ++k) {
    if (k >= truth.sigma.size()) throw ValidationError({"model has more components than truth"});
    report.kl_per_component.push_back(kl_divergence(model.params.sigma_reg[k], truth.sigma[k]));
  }
  report.kl_mean = kl_mean(model.params.sigma_reg, truth.sigma);
  report.mse_mu = mse_mu(model.params.mu, truth.mu);
  report.mse_pi = mse_pi(model.params.pi, truth.pi);
  if (!mask_path.empty() && !truth_mask_path.empty()) {
    const CellMask mask = io::read_mask_csv(mask_path);
    const CellMask truth_mask = io::read_mask_csv(truth_mask_path);
    report.flags = flag_scores(mask, truth_mask);
  }

  ensure_out_dir(out_dir);
  io::write_metrics_json(join(out_dir, "metrics.json"), report);
  std::cout << "evaluate: kl_mean=" << io::format_double(report.kl_mean) << "\n";
  return 0;
}

int run_sweep(const std::string& data_path, const std::string& config_path,
              const std::vector<double>& alphas, const std::string& out_dir,
              const std::optional<std::uint64_t>& seed) {
  if (alphas.empty()) throw ValidationError({"--alphas must list at least one value"});
  for (double a : alphas)
    if (!(a >= 0.5 && a <= 1.0)) throw ValidationError({"alpha values must lie in [0.5, 1]"});

  const GroupedData data = io::read_data_csv(data_path);
  const EstimatorConfig cfg = load_fit_config(config_path, seed);
  const auto sweep = alpha_sweep(data, cfg, alphas);

  ensure_out_dir(out_dir);
  std::ofstream t_csv(join(out_dir, "sweep_responsibilities.csv"), std::ios::binary);
  std::ofstream r_csv(join(out_dir, "sweep_residuals.csv"), std::ios::binary);
  if (!t_csv || !r_csv) throw io::IoError("cannot open sweep CSV outputs in " + out_dir);
  t_csv << "alpha,group,i,k,t\n";
  r_csv << "alpha,group,i,j,residual\n";

  for (std::size_t s = 0; s < sweep.size(); ++s) {
    const auto& [alpha, result] = sweep[s];
    const std::string tag = std::to_string(s + 1);
    io::ModelFile model{result.params, result.center, result.scale, data.variable_names,
                        data.group_names};
    io::write_model_json(join(out_dir, "model_" + tag + ".json"), model);
    io::write_mask_csv(join(out_dir, "mask_" + tag + ".csv"), result.mask, data.variable_names);

    const std::string alpha_str = io::format_double(alpha);
    for (int g = 0; g < data.n_groups(); ++g) {
      const Matrix& t = result.resp.groups[static_cast<std::size_t>(g)];
      for (Eigen::Index i = 0; i < t.rows(); ++i)
        for (Eigen::Index k = 0; k < t.cols(); ++k)
          t_csv << alpha_str << ',' << (g + 1) << ',' << (i + 1) << ',' << (k + 1) << ','
                << io::format_double(t(i, k)) << '\n';
    }
    const ResidualMatrix res = residuals(data, result);
    for (int g = 0; g < data.n_groups(); ++g) {
      const Matrix& r = res.values[static_cast<std::size_t>(g)];
      for (Eigen::Index i = 0; i < r.rows(); ++i)
        for (Eigen::Index j = 0; j < r.cols(); ++j)
          r_csv << alpha_str << ',' << (g + 1) << ',' << (i + 1) << ',' << (j + 1) << ','
                << io::format_double(r(i, j)) << '\n';
    }
  }
  if (!t_csv || !r_csv) throw io::IoError("failed while writing sweep CSVs in " + out_dir);
  std::cout << "sweep: " << sweep.size() << " fits\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cellwise-robust estimation of multi-group Gaussian mixture models"};
  app.require_subcommand(1);

  std::string data_path, config_path, out_dir;
  std::string model_path, truth_path, mask_path, truth_mask_path;
  std::vector<double> alphas;
  std::uint64_t seed_value = 0;

  auto* fit_cmd = app.add_subcommand("fit", "Fit the model to a grouped-data CSV");
  fit_cmd->add_option("--data", data_path, "input data CSV")->required();
  fit_cmd->add_option("--config", config_path, "estimator config JSON");
  fit_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  auto* fit_seed = fit_cmd->add_option("--seed", seed_value, "override config seed");

  auto* sim_cmd = app.add_subcommand("simulate", "Generate synthetic grouped data");
  sim_cmd->add_option("--config", config_path, "simulation config JSON")->required();
  sim_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  auto* sim_seed = sim_cmd->add_option("--seed", seed_value, "override config seed");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a fitted model against ground truth");
  eval_cmd->add_option("--model", model_path, "model JSON from fit")->required();
  eval_cmd->add_option("--truth", truth_path, "truth JSON from simulate")->required();
  eval_cmd->add_option("--mask", mask_path, "estimated mask CSV");
  eval_cmd->add_option("--truth-mask", truth_mask_path, "contamination mask CSV");
  eval_cmd->add_option("--out-dir", out_dir, "output directory")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Fit across a list of alpha values");
  sweep_cmd->add_option("--data", data_path, "input data CSV")->required();
  sweep_cmd->add_option("--config", config_path, "estimator config JSON");
  sweep_cmd->add_option("--alphas", alphas, "alpha values")->delimiter(',');
  sweep_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  auto* sweep_seed = sweep_cmd->add_option("--seed", seed_value, "override config seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit_cmd) {
      const auto seed = fit_seed->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
      return run_fit(data_path, config_path, out_dir, seed);
    }
    if (*sim_cmd) {
      const auto seed = sim_seed->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
      return run_simulate(config_path, out_dir, seed);
    }
    if (*eval_cmd) return run_evaluate(model_path, truth_path, mask_path, truth_mask_path, out_dir);
    if (*sweep_cmd) {
      const auto seed = sweep_seed->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
      return run_sweep(data_path, config_path, alphas, out_dir, seed);
    }
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FactorizationError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
