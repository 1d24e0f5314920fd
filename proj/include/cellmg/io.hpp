#pragma once

#include "cellmg/diagnostics.hpp"
#include "cellmg/metrics.hpp"
#include "cellmg/robust.hpp"
#include "cellmg/simulation.hpp"
#include "cellmg/types.hpp"

#include <stdexcept>
#include <string>

namespace cellmg::io {

/// File-level failures (missing/unreadable/unwritable paths).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest exact decimal for a double (%.17g), used for all CSV numbers.
std::string format_double(double v);

// CSV: header row mandatory, UTF-8, LF endings, row-major cells.
// Data files carry a 1-based integer `group` column plus numeric variables.
GroupedData read_data_csv(const std::string& path);
void write_data_csv(const std::string& path, const GroupedData& data);

CellMask read_mask_csv(const std::string& path);
void write_mask_csv(const std::string& path, const CellMask& mask,
                    const std::vector<std::string>& variable_names);

void write_responsibilities_csv(const std::string& path, const Responsibilities& resp);
void write_residuals_csv(const std::string& path, const ResidualMatrix& res,
                         const std::vector<std::string>& variable_names);

struct ModelFile {
  MixtureParams params;
  Vector center;
  Vector scale;
  std::vector<std::string> variable_names;
  std::vector<std::string> group_names;
};

void write_model_json(const std::string& path, const ModelFile& model);
ModelFile read_model_json(const std::string& path);

void write_truth_json(const std::string& path, const GroundTruth& truth);
GroundTruth read_truth_json(const std::string& path);

EstimatorConfig read_fit_config_json(const std::string& path);
SimulationConfig read_sim_config_json(const std::string& path);

void write_summary_json(const std::string& path, const FitResult& fit);

struct MetricsReport {
  double kl_mean = 0.0;
  std::vector<double> kl_per_component;
  double mse_mu = 0.0;
  double mse_pi = 0.0;
  FlagScores flags;
};

void write_metrics_json(const std::string& path, const MetricsReport& report);

}  // namespace cellmg::io
