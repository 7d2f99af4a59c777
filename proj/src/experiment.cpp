#include "ntkinfo/experiment.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ntkinfo/dynamics.hpp"
#include "ntkinfo/mc_oracle.hpp"
#include "parallel.hpp"

namespace ntkinfo {

using nlohmann::json;

namespace {

constexpr double kOracleTolerance = 0.05;
constexpr double kLimitTolerance = 1e-6;
constexpr double kDerivativeTolerance = 1e-4;

// Seeds of the independent random streams, derived from the master seed.
std::uint64_t metric_seed(const ExperimentConfig& cfg) { return cfg.seed + 1; }
std::uint64_t oracle_seed(const ExperimentConfig& cfg) { return cfg.seed + 2; }

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array()) {
    throw ConfigError("mixing must be a nonempty array of rows");
  }
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError("mixing rows differ in length");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

std::vector<double> tau_grid_from_json(const json& node) {
  if (node.is_array()) return node.get<std::vector<double>>();
  if (node.is_object()) {
    return ExperimentConfig::log_spaced(node.value("min", 1e-2), node.value("max", 1e10),
                                        node.value("points", 120));
  }
  throw ConfigError("tau_grid must be an array or {min, max, points}");
}

ArchitectureSpec arch_for(const ExperimentConfig& cfg, double weight_variance) {
  ArchitectureSpec arch = cfg.arch_base;
  arch.weight_variance = weight_variance;
  arch.input_dim = cfg.task.input_dim;
  return arch;
}

bool all_finite(const TrajectoryRecord& r) {
  for (double v : {r.tau, r.train_loss, r.test_loss, r.izy_lower, r.izx_lower, r.izx_upper,
                   r.izd_upper, r.fisher_trace, r.path_length_bound, r.itheta_d,
                   r.ditheta_d_dtau}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string file_stem(double weight_variance) {
  return "trajectory_sw2_" + format_double(weight_variance) + ".csv";
}

}  // namespace

std::vector<double> ExperimentConfig::log_spaced(double first, double last, int points) {
  if (!(first > 0.0) || !(last > first) || points < 1) {
    throw ConfigError("log-spaced grid needs 0 < first < last and points >= 1");
  }
  if (points == 1) return {first};
  std::vector<double> out(points);
  const double lo = std::log10(first);
  const double step = (std::log10(last) - lo) / (points - 1);
  for (int i = 0; i < points; ++i) out[i] = std::pow(10.0, lo + step * i);
  out.front() = first;
  out.back() = last;
  return out;
}

void ExperimentConfig::validate() const {
  try {
    ArchitectureSpec probe = arch_base;
    probe.weight_variance = 1.0;
    probe.input_dim = task.input_dim;
    probe.validate();
    metrics.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (weight_variance_grid.empty()) throw ConfigError("weight_variance_grid is empty");
  for (double v : weight_variance_grid) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("weight variances must be positive");
  }
  if (tau_grid.empty()) throw ConfigError("tau_grid is empty");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (!(tau_grid[i] >= 0.0) || !std::isfinite(tau_grid[i])) {
      throw ConfigError("tau_grid values must be finite and nonnegative");
    }
    if (i > 0 && !(tau_grid[i] > tau_grid[i - 1])) {
      throw ConfigError("tau_grid must be strictly increasing");
    }
  }
  if (task.input_dim < 1 || task.n_train < 1 || task.n_test < 1) {
    throw ConfigError("task dimensions and split sizes must be positive");
  }
  if (!(task.sigma_x > 0.0) || !(task.sigma_y > 0.0) || !(task.target_mi >= 0.0)) {
    throw ConfigError("task scales must be positive and target_mi nonnegative");
  }
  if (task.mixing && (task.mixing->rows() != 1 || task.mixing->cols() != task.input_dim)) {
    throw ConfigError("mixing must be 1 x input_dim");
  }
  if (metrics.batch_size > task.n_test) {
    throw ConfigError("metrics.batch_size exceeds the test split size");
  }
  if (verify.width < 64 || verify.n_networks < 1 || verify.n_points < 2 ||
      verify.ensemble_draws < 2) {
    throw ConfigError("invalid verify settings");
  }
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  try {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    cfg.seed = doc.value("seed", cfg.seed);
    if (doc.contains("task")) {
      const json& t = doc.at("task");
      cfg.task.input_dim = t.value("input_dim", cfg.task.input_dim);
      cfg.task.target_mi = t.value("target_mi", cfg.task.target_mi);
      cfg.task.sigma_x = t.value("sigma_x", cfg.task.sigma_x);
      cfg.task.sigma_y = t.value("sigma_y", cfg.task.sigma_y);
      cfg.task.n_train = t.value("n_train", cfg.task.n_train);
      cfg.task.n_test = t.value("n_test", cfg.task.n_test);
      if (t.contains("mixing") && !t.at("mixing").is_null()) {
        cfg.task.mixing = matrix_from_json(t.at("mixing"));
      }
    }
    if (doc.contains("architecture")) {
      const json& a = doc.at("architecture");
      cfg.arch_base.depth = a.value("depth", cfg.arch_base.depth);
      cfg.arch_base.activation =
          activation_from_string(a.value("activation", std::string(to_string(cfg.arch_base.activation))));
      cfg.arch_base.bias_variance = a.value("bias_variance", cfg.arch_base.bias_variance);
    }
    cfg.arch_base.input_dim = cfg.task.input_dim;
    if (doc.contains("weight_variance_grid")) {
      cfg.weight_variance_grid = doc.at("weight_variance_grid").get<std::vector<double>>();
    }
    if (doc.contains("tau_grid")) cfg.tau_grid = tau_grid_from_json(doc.at("tau_grid"));
    cfg.metrics.rng_seed = metric_seed(cfg);
    if (doc.contains("metrics")) {
      const json& m = doc.at("metrics");
      cfg.metrics.batch_size = m.value("batch_size", cfg.metrics.batch_size);
      cfg.metrics.mc_samples = m.value("mc_samples", cfg.metrics.mc_samples);
      cfg.metrics.observation_variance =
          m.value("observation_variance", cfg.metrics.observation_variance);
      cfg.metrics.rng_seed = m.value("rng_seed", cfg.metrics.rng_seed);
    }
    if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
    cfg.emit_verify = doc.value("emit_verify", cfg.emit_verify);
    if (doc.contains("verify")) {
      const json& v = doc.at("verify");
      cfg.verify.width = v.value("width", cfg.verify.width);
      cfg.verify.n_networks = v.value("n_networks", cfg.verify.n_networks);
      cfg.verify.n_points = v.value("n_points", cfg.verify.n_points);
      cfg.verify.ensemble_draws = v.value("ensemble_draws", cfg.verify.ensemble_draws);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json task = {{"input_dim", cfg.task.input_dim},   {"target_mi", cfg.task.target_mi},
               {"sigma_x", cfg.task.sigma_x},       {"sigma_y", cfg.task.sigma_y},
               {"n_train", cfg.task.n_train},       {"n_test", cfg.task.n_test},
               {"mixing", nullptr}};
  if (cfg.task.mixing) task["mixing"] = matrix_to_json(*cfg.task.mixing);
  return {
      {"seed", cfg.seed},
      {"task", task},
      {"architecture",
       {{"depth", cfg.arch_base.depth},
        {"activation", std::string(to_string(cfg.arch_base.activation))},
        {"bias_variance", cfg.arch_base.bias_variance}}},
      {"weight_variance_grid", cfg.weight_variance_grid},
      {"tau_grid", cfg.tau_grid},
      {"metrics",
       {{"batch_size", cfg.metrics.batch_size},
        {"mc_samples", cfg.metrics.mc_samples},
        {"observation_variance", cfg.metrics.observation_variance},
        {"rng_seed", cfg.metrics.rng_seed}}},
      {"output_dir", cfg.output_dir.string()},
      {"emit_verify", cfg.emit_verify},
      {"verify",
       {{"width", cfg.verify.width},
        {"n_networks", cfg.verify.n_networks},
        {"n_points", cfg.verify.n_points},
        {"ensemble_draws", cfg.verify.ensemble_draws}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void apply_environment(ExperimentConfig& cfg) {
  const char* value = std::getenv("NTKINFO_SEED");
  if (value == nullptr || *value == '\0') return;
  std::uint64_t seed = 0;
  const char* end = value + std::char_traits<char>::length(value);
  const auto [ptr, ec] = std::from_chars(value, end, seed);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(std::string("NTKINFO_SEED is not an unsigned integer: ") + value);
  }
  const bool derived_metric_seed = cfg.metrics.rng_seed == metric_seed(cfg);
  cfg.seed = seed;
  if (derived_metric_seed) cfg.metrics.rng_seed = metric_seed(cfg);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json doc = config_to_json(cfg);
  doc.erase("output_dir");
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

ExperimentData make_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const TaskConfig& t = cfg.task;
  GaussianTask task =
      t.mixing ? GaussianTask::isotropic(*t.mixing, t.sigma_x, t.sigma_y, cfg.seed)
               : GaussianTask::with_information(t.input_dim, t.target_mi, t.sigma_x, t.sigma_y,
                                                cfg.seed);
  TaskSample train = sample(task, t.n_train, Split::Train);
  TaskSample test = sample(task, t.n_test, Split::Test);
  return {std::move(task), std::move(train), std::move(test)};
}

std::vector<TrajectoryRecord> run_trajectory(const ExperimentConfig& cfg, const ExperimentData& data,
                                             double weight_variance) {
  const ArchitectureSpec arch = arch_for(cfg, weight_variance);
  const KernelPair kp = compute_kernels(arch, data.train.inputs, data.test.inputs);
  const SpectralOperator spec(kp.ntk_train);
  const Eigen::VectorXd y_train = data.train.targets.col(0);
  const Eigen::VectorXd y_test = data.test.targets.col(0);

  const auto train_eval = PredictiveEvaluator::on_training_set(spec, kp.nngp_train, y_train);
  const PredictiveEvaluator test_eval(spec, kp, y_train);
  const SpectralMetrics spectral(spec, kp.nngp_train, y_train);
  const Eigen::MatrixXd draws = izx_standard_draws(cfg.metrics);
  const double fisher = fisher_trace(kp);
  const double hy = entropy_y(data.task);
  const auto batch = static_cast<Eigen::Index>(cfg.metrics.batch_size);
  const double n_train = static_cast<double>(y_train.size());
  const double n_test = static_cast<double>(y_test.size());

  std::vector<TrajectoryRecord> records;
  records.reserve(cfg.tau_grid.size());
  for (double tau : cfg.tau_grid) {
    const PredictiveDistribution train = train_eval(tau, CovarianceMode::Diagonal);
    const PredictiveDistribution test = test_eval(tau, CovarianceMode::Diagonal);
    TrajectoryRecord r;
    r.tau = tau;
    r.train_loss = expected_loss(train, y_train) / n_train;
    r.test_loss = expected_loss(test, y_test) / n_test;
    const Estimate izy = izy_lower(test, y_test, hy, cfg.metrics.observation_variance);
    r.izy_lower = izy.value;
    r.izy_se = izy.standard_error;
    const IzxBounds izx =
        izx_bounds(test.mean.head(batch), test.variances.head(batch), draws);
    r.izx_lower = izx.lower;
    r.izx_upper = izx.upper;
    r.izx_se = izx.lower_se;
    r.izd_upper = izd_upper(test, kp.nngp_test_diag);
    r.fisher_trace = fisher;
    r.path_length_bound = spectral.path_length_bound(tau);
    r.itheta_d = spectral.itheta_d_lower(tau);
    r.ditheta_d_dtau = spectral.ditheta_d_dtau(tau);
    r.degeneracy_flags = izx.degenerate;
    if (!all_finite(r)) {
      std::cerr << "warning: dropping non-finite row at tau=" << format_double(tau)
                << " (weight_variance=" << format_double(weight_variance) << ")\n";
      continue;
    }
    records.push_back(r);
  }
  return records;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string csv_row(const TrajectoryRecord& r) {
  std::string out;
  for (double v : {r.tau, r.train_loss, r.test_loss, r.izy_lower, r.izx_lower, r.izx_upper,
                   r.izd_upper, r.fisher_trace, r.path_length_bound, r.itheta_d,
                   r.ditheta_d_dtau}) {
    out += format_double(v);
    out += ',';
  }
  out += std::to_string(r.degeneracy_flags);
  return out;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TrajectoryRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const auto& r : records) out << csv_row(r) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<TrajectoryRecord> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kCsvHeader) throw std::runtime_error("unexpected CSV header in " + path.string());
  std::vector<TrajectoryRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 12) throw std::runtime_error("malformed CSV row in " + path.string());
    TrajectoryRecord r;
    r.tau = v[0];
    r.train_loss = v[1];
    r.test_loss = v[2];
    r.izy_lower = v[3];
    r.izx_lower = v[4];
    r.izx_upper = v[5];
    r.izd_upper = v[6];
    r.fisher_trace = v[7];
    r.path_length_bound = v[8];
    r.itheta_d = v[9];
    r.ditheta_d_dtau = v[10];
    r.degeneracy_flags = static_cast<int>(v[11]);
    out.push_back(r);
  }
  return out;
}

std::vector<FrontierPoint> frontier_table(const ExperimentConfig& cfg, int points) {
  if (points < 2) throw std::invalid_argument("frontier table needs at least two points");
  const ExperimentData data = make_data(cfg);
  const double top = std::log(static_cast<double>(cfg.metrics.batch_size));
  Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(points, 0.0, top);
  const Eigen::VectorXd values = gib_frontier(data.task, grid);
  std::vector<FrontierPoint> out(points);
  for (int i = 0; i < points; ++i) out[i] = {grid[i], values[i]};
  return out;
}

void write_frontier_csv(std::ostream& out, const std::vector<FrontierPoint>& table) {
  out << "izx,izy_frontier\n";
  for (const auto& p : table) out << format_double(p.izx) << ',' << format_double(p.izy) << '\n';
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec || !std::filesystem::is_directory(cfg.output_dir)) {
    throw std::runtime_error("cannot create output directory " + cfg.output_dir.string());
  }
  const std::filesystem::path manifest_path = cfg.output_dir / "manifest.json";
  {
    std::ofstream probe(manifest_path, std::ios::app);
    if (!probe) throw std::runtime_error("output directory is not writable: " + cfg.output_dir.string());
  }

  const ExperimentData data = make_data(cfg);
  SweepResult result;
  result.outputs.resize(cfg.weight_variance_grid.size());
  detail::parallel_for(cfg.weight_variance_grid.size(), [&](std::size_t i) {
    SweepOutput& o = result.outputs[i];
    o.weight_variance = cfg.weight_variance_grid[i];
    o.records = run_trajectory(cfg, data, o.weight_variance);
    o.fisher_trace = o.records.empty() ? 0.0 : o.records.front().fisher_trace;
    o.csv = cfg.output_dir / file_stem(o.weight_variance);
    write_trajectory_csv(o.csv, o.records);
  });

  json trajectories = json::array();
  for (const auto& o : result.outputs) {
    trajectories.push_back({{"weight_variance", o.weight_variance},
                            {"fisher_trace", o.fisher_trace},
                            {"csv", o.csv.filename().string()},
                            {"rows", o.records.size()}});
  }
  json frontier = json::array();
  for (const auto& p : frontier_table(cfg)) frontier.push_back({p.izx, p.izy});
  const double mi = exact_mi(data.task);
  json manifest = {
      {"config", config_to_json(cfg)},
      {"config_hash", config_hash(cfg)},
      {"seed", cfg.seed},
      {"exact_mi", mi},
      {"entropy_y", entropy_y(data.task)},
      {"mixing", matrix_to_json(data.task.mixing)},
      {"csv_columns", kCsvHeader},
      {"trajectories", trajectories},
      {"gib_frontier", frontier},
      {"gib_frontier_saturation", mi},
  };
  if (cfg.emit_verify) {
    const VerifyReport report = verify(cfg);
    json checks = json::array();
    for (const auto& c : report.checks) {
      checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    manifest["verify"] = {{"passed", report.passed()}, {"checks", checks}};
  }
  std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
  result.manifest = manifest_path;
  return result;
}

bool VerifyReport::passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return !checks.empty();
}

VerifyReport verify(const ExperimentConfig& cfg) {
  cfg.validate();
  const ExperimentData data = make_data(cfg);
  VerifyReport report;
  auto add = [&](std::string name, bool ok, std::string detail) {
    report.checks.push_back({std::move(name), ok, std::move(detail)});
  };

  // Gaussian task: closed form against the determinant route.
  {
    const double closed = exact_mi(data.task);
    const double det = mi_from_covariances(data.task);
    add("task mutual information", std::abs(closed - det) <= 1e-10,
        "closed=" + format_double(closed) + " determinant=" + format_double(det));
  }

  const Eigen::Index points = std::min<Eigen::Index>(cfg.verify.n_points, data.train.inputs.rows());
  const Eigen::MatrixXd oracle_inputs = data.train.inputs.topRows(points);
  const Eigen::Index n_small = std::min<Eigen::Index>(20, data.train.inputs.rows());
  const Eigen::Index m_small = std::min<Eigen::Index>(5, data.test.inputs.rows());
  const Eigen::MatrixXd x_small = data.train.inputs.topRows(n_small);
  const Eigen::VectorXd y_small = data.train.targets.col(0).head(n_small);
  const Eigen::MatrixXd x_query = data.test.inputs.topRows(m_small);

  for (double wv : cfg.weight_variance_grid) {
    const ArchitectureSpec arch = arch_for(cfg, wv);
    const std::string tag = " [sw2=" + format_double(wv) + "]";

    FiniteWidthConfig fw;
    fw.width = cfg.verify.width;
    fw.n_networks = cfg.verify.n_networks;
    fw.arch = arch;
    fw.seed = oracle_seed(cfg);
    const EmpiricalKernels empirical = empirical_kernels(fw, oracle_inputs);
    const KernelBlock analytic = kernel_gram(arch, oracle_inputs);
    const double e_nngp = relative_frobenius_error(empirical.nngp, analytic.nngp);
    const double e_ntk = relative_frobenius_error(empirical.ntk, analytic.ntk);
    add("kernel oracle" + tag, e_nngp <= kOracleTolerance && e_ntk <= kOracleTolerance,
        "nngp_err=" + format_double(e_nngp) + " ntk_err=" + format_double(e_ntk));

    const KernelPair kp = compute_kernels(arch, x_small, x_query);
    const SpectralOperator spec(kp.ntk_train);
    const PredictiveDistribution prior = predictive(spec, kp, y_small, 0.0);
    add("prior limit tau=0" + tag,
        prior.mean.isZero(0.0) && prior.covariance == kp.nngp_test, "exact comparison");

    const KernelPair self = compute_kernels(arch, x_small, x_small);
    const SpectralOperator self_spec(self.ntk_train);
    const PredictiveDistribution fit = predictive(self_spec, self, y_small, kInfiniteTime);
    const double mean_err = (fit.mean - y_small).cwiseAbs().maxCoeff();
    const double cov_err = fit.covariance.cwiseAbs().maxCoeff();
    add("interpolation limit tau=inf" + tag,
        mean_err <= kLimitTolerance && cov_err <= kLimitTolerance,
        "mean_err=" + format_double(mean_err) + " cov_err=" + format_double(cov_err));

    const PredictiveDistribution mid = predictive(spec, kp, y_small, 1.0);
    const EnsembleMoments ens =
        ensemble_trajectories(spec, kp, y_small, 1.0, cfg.verify.ensemble_draws, oracle_seed(cfg));
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m_small; ++i) {
      worst = std::max(worst, std::abs(mid.mean[i] - ens.test.mean[i]) / ens.test.mean_se[i]);
      for (Eigen::Index j = 0; j <= i; ++j) {
        worst = std::max(worst, std::abs(mid.covariance(i, j) - ens.test.covariance(i, j)) /
                                    ens.test.covariance_se(i, j));
      }
    }
    add("ensemble oracle tau=1" + tag, worst <= 3.0, "max_z=" + format_double(worst));

    const SpectralMetrics metrics(spec, kp.nngp_train, y_small);
    double fd_worst = 0.0;
    for (double tau : ExperimentConfig::log_spaced(1e-2, 1e4, 20)) {
      const double step = 1e-5 * tau;
      const double fd =
          (metrics.itheta_d_lower(tau + step) - metrics.itheta_d_lower(tau - step)) / (2 * step);
      const double exact = metrics.ditheta_d_dtau(tau);
      fd_worst = std::max(fd_worst, std::abs(fd - exact) / std::abs(exact));
    }
    add("dI(theta;D)/dtau finite differences" + tag, fd_worst <= kDerivativeTolerance,
        "max_rel_err=" + format_double(fd_worst));
  }
  return report;
}

}  // namespace ntkinfo
