#include "cellmg/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace cellmg::io {

using json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open for reading: " + path);
  return f;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary); // LF endings on every platform
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& s, std::size_t line_no, const std::string& column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError({"non-numeric cell at data row " + std::to_string(line_no) + ", column `" +
                           column + "`: \"" + s + "\""});
  }
  return v;
}

struct RawTable {
  std::vector<std::string> variable_names;
  int group_column = -1;
  std::vector<int> group_ids; // 1-based, per row
  std::vector<std::vector<double>> cells;
};

RawTable read_grouped_table(const std::string& path) {
  std::ifstream f = open_input(path);
  std::string line;
  if (!std::getline(f, line)) throw ValidationError({"empty CSV file: " + path});

  RawTable t;
  const std::vector<std::string> header = split_csv_line(line);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "group")
      t.group_column = static_cast<int>(c);
    else
      t.variable_names.push_back(header[c]);
  }
  if (t.group_column < 0) throw ValidationError({"CSV is missing the required `group` column: " + path});

  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ValidationError({"row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(header.size())});
    std::vector<double> row;
    row.reserve(t.variable_names.size());
    int gid = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (static_cast<int>(c) == t.group_column) {
        const double g = parse_number(fields[c], line_no, "group");
        gid = static_cast<int>(g);
        if (g != static_cast<double>(gid) || gid < 1)
          throw ValidationError({"row " + std::to_string(line_no) + ": group must be a 1-based integer"});
      } else {
        row.push_back(parse_number(fields[c], line_no, header[c]));
      }
    }
    t.group_ids.push_back(gid);
    t.cells.push_back(std::move(row));
  }
  if (t.cells.empty()) throw ValidationError({"CSV has no data rows: " + path});
  return t;
}

std::vector<Matrix> assemble_groups(const RawTable& t) {
  int n_groups = 0;
  for (int g : t.group_ids) n_groups = std::max(n_groups, g);
  std::vector<std::vector<std::size_t>> rows_of(static_cast<std::size_t>(n_groups));
  for (std::size_t r = 0; r < t.group_ids.size(); ++r)
    rows_of[static_cast<std::size_t>(t.group_ids[r] - 1)].push_back(r);

  const auto p = static_cast<Eigen::Index>(t.variable_names.size());
  std::vector<Matrix> groups;
  groups.reserve(static_cast<std::size_t>(n_groups));
  for (int g = 0; g < n_groups; ++g) {
    const auto& rows = rows_of[static_cast<std::size_t>(g)];
    if (rows.empty())
      throw ValidationError({"group " + std::to_string(g + 1) + " has no rows (groups must be 1..N)"});
    Matrix m(static_cast<Eigen::Index>(rows.size()), p);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (Eigen::Index j = 0; j < p; ++j)
        m(static_cast<Eigen::Index>(i), j) = t.cells[rows[i]][static_cast<std::size_t>(j)];
    groups.push_back(std::move(m));
  }
  return groups;
}

std::vector<std::string> default_names(const std::string& prefix, int n) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

void write_grouped_csv(const std::string& path, const std::vector<std::string>& variable_names,
                       int n_groups, const std::function<Eigen::Index(int)>& rows_of,
                       const std::function<std::string(int, Eigen::Index, int)>& cell) {
  std::ofstream f = open_output(path);
  f << "group";
  for (const auto& name : variable_names) f << ',' << name;
  f << '\n';
  for (int g = 0; g < n_groups; ++g) {
    for (Eigen::Index i = 0; i < rows_of(g); ++i) {
      f << (g + 1);
      for (int j = 0; j < static_cast<int>(variable_names.size()); ++j) f << ',' << cell(g, i, j);
      f << '\n';
    }
  }
  if (!f) throw IoError("failed while writing: " + path);
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

Matrix matrix_from_json(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
  return m;
}

json parse_json_file(const std::string& path) {
  std::ifstream f = open_input(path);
  try {
    return json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({"invalid JSON in " + path + ": " + e.what()});
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f = open_output(path);
  f << j.dump(2) << '\n';
  if (!f) throw IoError("failed while writing: " + path);
}

}  // namespace

GroupedData read_data_csv(const std::string& path) {
  const RawTable t = read_grouped_table(path);
  GroupedData data;
  data.groups = assemble_groups(t);
  data.variable_names = t.variable_names;
  data.group_names = default_names("g", data.n_groups());
  return data;
}

void write_data_csv(const std::string& path, const GroupedData& data) {
  const auto names =
      data.variable_names.empty() ? default_names("v", data.dim()) : data.variable_names;
  write_grouped_csv(
      path, names, data.n_groups(), [&](int g) { return data.rows(g); },
      [&](int g, Eigen::Index i, int j) {
        return format_double(data.groups[static_cast<std::size_t>(g)](i, j));
      });
}

CellMask read_mask_csv(const std::string& path) {
  const RawTable t = read_grouped_table(path);
  GroupedData as_data;
  as_data.groups = assemble_groups(t);
  CellMask mask;
  mask.groups.reserve(as_data.groups.size());
  for (const auto& g : as_data.groups) {
    MaskMatrix m(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        const double v = g(i, j);
        if (v != 0.0 && v != 1.0)
          throw ValidationError({"mask entries must be 0 or 1 in " + path});
        m(i, j) = v == 1.0 ? 1 : 0;
      }
    mask.groups.push_back(std::move(m));
  }
  return mask;
}

void write_mask_csv(const std::string& path, const CellMask& mask,
                    const std::vector<std::string>& variable_names) {
  const int p = mask.groups.empty() ? 0 : static_cast<int>(mask.groups.front().cols());
  const auto names = variable_names.empty() ? default_names("v", p) : variable_names;
  write_grouped_csv(
      path, names, static_cast<int>(mask.groups.size()),
      [&](int g) { return mask.groups[static_cast<std::size_t>(g)].rows(); },
      [&](int g, Eigen::Index i, int j) {
        return std::string(mask.groups[static_cast<std::size_t>(g)](i, j) ? "1" : "0");
      });
}

void write_responsibilities_csv(const std::string& path, const Responsibilities& resp) {
  const int n_comp = resp.groups.empty() ? 0 : static_cast<int>(resp.groups.front().cols());
  write_grouped_csv(
      path, default_names("t", n_comp), static_cast<int>(resp.groups.size()),
      [&](int g) { return resp.groups[static_cast<std::size_t>(g)].rows(); },
      [&](int g, Eigen::Index i, int j) {
        return format_double(resp.groups[static_cast<std::size_t>(g)](i, j));
      });
}

void write_residuals_csv(const std::string& path, const ResidualMatrix& res,
                         const std::vector<std::string>& variable_names) {
  const int p = res.values.empty() ? 0 : static_cast<int>(res.values.front().cols());
  const auto names = variable_names.empty() ? default_names("v", p) : variable_names;
  write_grouped_csv(
      path, names, static_cast<int>(res.values.size()),
      [&](int g) { return res.values[static_cast<std::size_t>(g)].rows(); },
      [&](int g, Eigen::Index i, int j) {
        return format_double(res.values[static_cast<std::size_t>(g)](i, j));
      });
}

void write_model_json(const std::string& path, const ModelFile& model) {
  const MixtureParams& p = model.params;
  json j;
  j["groups"] = p.n_components();
  j["variables"] = p.mu.empty() ? 0 : static_cast<int>(p.mu.front().size());
  j["group_names"] = model.group_names;
  j["variable_names"] = model.variable_names;
  j["pi"] = matrix_to_json(p.pi);
  json mu = json::array(), sigma = json::array(), sigma_reg = json::array(), target = json::array();
  for (int k = 0; k < p.n_components(); ++k) {
    mu.push_back(vector_to_json(p.mu[static_cast<std::size_t>(k)]));
    sigma.push_back(matrix_to_json(p.sigma[static_cast<std::size_t>(k)].get()));
    sigma_reg.push_back(matrix_to_json(p.sigma_reg[static_cast<std::size_t>(k)].get()));
    target.push_back(vector_to_json(p.reg.target_diag[static_cast<std::size_t>(k)]));
  }
  j["mu"] = std::move(mu);
  j["sigma"] = std::move(sigma);
  j["sigma_reg"] = std::move(sigma_reg);
  j["regularization"] = {{"target_diag", std::move(target)}, {"rho", p.reg.rho}, {"kappa", p.reg.kappa}};
  j["standardization"] = {{"center", vector_to_json(model.center)},
                          {"scale", vector_to_json(model.scale)}};
  write_json_file(path, j);
}

ModelFile read_model_json(const std::string& path) {
  const json j = parse_json_file(path);
  ModelFile model;
  try {
    model.params.pi = matrix_from_json(j.at("pi"));
    for (const auto& v : j.at("mu")) model.params.mu.push_back(vector_from_json(v));
    for (const auto& m : j.at("sigma")) model.params.sigma.emplace_back(matrix_from_json(m));
    for (const auto& m : j.at("sigma_reg")) model.params.sigma_reg.emplace_back(matrix_from_json(m));
    const auto& reg = j.at("regularization");
    for (const auto& v : reg.at("target_diag")) model.params.reg.target_diag.push_back(vector_from_json(v));
    model.params.reg.rho = reg.at("rho").get<std::vector<double>>();
    model.params.reg.kappa = reg.at("kappa").get<std::vector<double>>();
    model.center = vector_from_json(j.at("standardization").at("center"));
    model.scale = vector_from_json(j.at("standardization").at("scale"));
    model.variable_names = j.value("variable_names", std::vector<std::string>{});
    model.group_names = j.value("group_names", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError({"malformed model JSON " + path + ": " + e.what()});
  }
  return model;
}

void write_truth_json(const std::string& path, const GroundTruth& truth) {
  json j;
  j["pi"] = matrix_to_json(truth.pi);
  json mu = json::array(), sigma = json::array();
  for (std::size_t k = 0; k < truth.mu.size(); ++k) {
    mu.push_back(vector_to_json(truth.mu[k]));
    sigma.push_back(matrix_to_json(truth.sigma[k].get()));
  }
  j["mu"] = std::move(mu);
  j["sigma"] = std::move(sigma);
  j["labels"] = truth.labels;
  write_json_file(path, j);
}

GroundTruth read_truth_json(const std::string& path) {
  const json j = parse_json_file(path);
  GroundTruth truth;
  try {
    truth.pi = matrix_from_json(j.at("pi"));
    for (const auto& v : j.at("mu")) truth.mu.push_back(vector_from_json(v));
    for (const auto& m : j.at("sigma")) truth.sigma.emplace_back(matrix_from_json(m));
    if (j.contains("labels")) truth.labels = j.at("labels").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError({"malformed truth JSON " + path + ": " + e.what()});
  }
  return truth;
}

EstimatorConfig read_fit_config_json(const std::string& path) {
  const json j = parse_json_file(path);
  EstimatorConfig cfg;
  try {
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.h_fraction = j.value("h_fraction", cfg.h_fraction);
    if (j.contains("h")) cfg.h = j.at("h").get<std::vector<int>>();
    cfg.eps_conv = j.value("eps_conv", cfg.eps_conv);
    cfg.max_iter = j.value("max_iter", cfg.max_iter);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError({"malformed config JSON " + path + ": " + e.what()});
  }
  return cfg;
}

SimulationConfig read_sim_config_json(const std::string& path) {
  const json j = parse_json_file(path);
  SimulationConfig cfg;
  try {
    cfg.n_groups = j.value("n_groups", cfg.n_groups);
    cfg.dim = j.value("p", cfg.dim);
    if (j.contains("n_per_group")) {
      if (j.at("n_per_group").is_array())
        cfg.n_per_group = j.at("n_per_group").get<std::vector<int>>();
      else
        cfg.n_per_group.assign(static_cast<std::size_t>(cfg.n_groups), j.at("n_per_group").get<int>());
    }
    cfg.pi_diag = j.value("pi_diag", cfg.pi_diag);
    const std::string mode = j.value("mean_mode", std::string("zero"));
    if (mode == "zero")
      cfg.mean_mode = SimulationConfig::MeanMode::Zero;
    else if (mode == "c_separated")
      cfg.mean_mode = SimulationConfig::MeanMode::CSeparated;
    else
      throw ValidationError({"mean_mode must be \"zero\" or \"c_separated\""});
    cfg.eps_cell = j.value("eps_cell", cfg.eps_cell);
    cfg.gamma_cell = j.value("gamma_cell", cfg.gamma_cell);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError({"malformed config JSON " + path + ": " + e.what()});
  }
  return cfg;
}

void write_summary_json(const std::string& path, const FitResult& fit) {
  json j;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["objective_trace"] = fit.objective_trace;
  j["clamped_penalties"] = fit.clamped_penalties;
  write_json_file(path, j);
}

void write_metrics_json(const std::string& path, const MetricsReport& report) {
  json j;
  j["kl_mean"] = report.kl_mean;
  j["kl_per_component"] = report.kl_per_component;
  j["mse_mu"] = report.mse_mu;
  j["mse_pi"] = report.mse_pi;
  j["precision"] = report.flags.precision;
  j["recall"] = report.flags.recall;
  j["f1"] = report.flags.f1;
  write_json_file(path, j);
}

}  // namespace cellmg::io
