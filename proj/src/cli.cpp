#include "qpdecon/cli.hpp"

#include "qpdecon/estimator.hpp"
#include "qpdecon/io.hpp"
#include "qpdecon/parallel.hpp"
#include "qpdecon/simlab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace qpdecon {

namespace {

using json = nlohmann::ordered_json;

struct DataOptions
{
  std::string input;
  std::string noise;
  std::string constraints{ "in" };
  std::string regularizer{ "auto" };
  int bins{ 0 };
  double lambda_min{ 1e-6 };
  double lambda_max{ 1e2 };
  int lambda_count{ 61 };
  std::string sure_mode{ "all" };
  bool full_penalty{ false };
  std::string out{ "." };
};

struct FitArgs : DataOptions
{
  std::string lambda{ "sure" };
  std::vector<double> probabilities{ default_probabilities() };
  bool sure_plot{ false };
};

struct SimulateArgs
{
  std::string dist{ "gamma:5,1" };
  std::string noise{ "gaussian:sigma2=3.2" };
  long n{ 5000 };
  int reps{ 100 };
  std::string methods{ "qp-in,kd-rect" };
  std::uint64_t seed{ 42 };
  std::vector<double> probabilities{ default_probabilities() };
  int bins{ 0 };
  std::string lambda{ "sure" };
  std::string h{ "rule" };
  double lambda_min{ 1e-6 };
  double lambda_max{ 1e2 };
  int lambda_count{ 61 };
  std::string sure_mode{ "all" };
  std::vector<double> oracle_lambda_range{ 1e-4, 1.0, 17 };
  std::vector<double> oracle_h_range{ 0.3, 1.5, 25 };
  int correlation_points{ 100 };
  std::string out{ "." };
};

int exit_code_for(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::InvalidSpec:
      return kExitUsage;
    case ErrorKind::SingularD:
    case ErrorKind::Infeasible:
    case ErrorKind::SolverFailure:
    case ErrorKind::NumericalOverflow:
      return kExitSolver;
    case ErrorKind::SelectionRequired:
      return kExitSelectionRequired;
    default:
      return kExitData;
  }
}

SureMode parse_sure_mode(const std::string& s)
{
  if (s == "equality")
    return SureMode::EqualityOnly;
  if (s == "all")
    return SureMode::AllConstraints;
  throw DeconError(ErrorKind::InvalidSpec, "sure mode must be 'equality' or 'all'");
}

std::optional<RegularizerKind> parse_regularizer(const std::string& s)
{
  if (s == "auto")
    return std::nullopt;
  return regularizer_from_string(s);
}

std::string prob_key(double p)
{
  std::ostringstream os;
  os << p;
  return os.str();
}

std::string safe_name(const std::string& s)
{
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out;
}

json vec_json(const std::vector<double>& v)
{
  json a = json::array();
  for (double x : v)
    a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

json vec_json(const Eigen::VectorXd& v)
{
  return vec_json(std::vector<double>(v.data(), v.data() + v.size()));
}

json sure_json(const SureCurve& c)
{
  json j;
  j["regularizer"] = to_string(c.chosen_regularizer);
  j["mode"] = to_string(c.mode);
  j["lambda_sure"] = c.chosen_lambda;
  j["min_sure"] = c.min_sure();
  j["lambdas"] = vec_json(c.lambdas);
  j["err"] = vec_json(c.err);
  j["penalty"] = vec_json(c.penalty);
  j["sure"] = vec_json(c.sure);
  return j;
}

json estimate_json(const DensityEstimate& e)
{
  json j;
  j["grid"] = { { "x1", e.grid.x1() }, { "xK", e.grid.xK() }, { "K", e.grid.size() },
                { "delta", e.grid.delta() } };
  j["n"] = e.n;
  j["lambda"] = e.lambda_used;
  j["regularizer"] = to_string(e.regularizer_used);
  j["constraints"] = e.constraints_used;
  j["pdf"] = vec_json(e.pdf);
  j["cdf"] = vec_json(e.cdf);
  json q = json::object();
  for (const auto& [p, v] : e.quantiles)
    q[prob_key(p)] = v;
  j["quantiles"] = q;
  const auto& s = e.diagnostics.solver;
  json d;
  d["solver"] = { { "status", to_string(s.status) },
                  { "iterations", s.iterations },
                  { "objective", s.objective },
                  { "kkt_residual", s.kkt_residual },
                  { "max_violation", s.max_violation } };
  if (s.mode_index)
    d["solver"]["mode_index"] = *s.mode_index;
  if (e.diagnostics.sure)
    d["sure"] = sure_json(*e.diagnostics.sure);
  if (e.diagnostics.sure_other)
    d["sure_other_regularizer"] = sure_json(*e.diagnostics.sure_other);
  if (e.diagnostics.scree) {
    d["scree"] = { { "lambdas", vec_json(e.diagnostics.scree->lambdas) },
                   { "q", vec_json(e.diagnostics.scree->q_values) } };
    if (e.diagnostics.scree->elbow_lambda)
      d["scree"]["elbow_lambda"] = *e.diagnostics.scree->elbow_lambda;
  }
  d["warnings"] = e.diagnostics.warnings;
  j["diagnostics"] = d;
  return j;
}

std::filesystem::path ensure_dir(const std::string& dir)
{
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

FitOptions fit_options(const DataOptions& a, int threads)
{
  FitOptions o;
  o.constraints = ConstraintSpec::parse(a.constraints);
  o.regularizer = parse_regularizer(a.regularizer);
  o.bins = a.bins;
  o.lambda_grid = log_grid(a.lambda_min, a.lambda_max, a.lambda_count);
  o.sure_mode = parse_sure_mode(a.sure_mode);
  o.full_penalty = a.full_penalty;
  o.threads = threads;
  return o;
}

void write_scree(const std::filesystem::path& dir, const ScreeCurve& curve,
                 std::optional<double> lambda_sure, std::vector<std::string>& files)
{
  write_text_file((dir / "scree.csv").string(), scree_curve_csv(curve));
  write_text_file((dir / "scree.svg").string(), scree_curve_svg(curve, lambda_sure));
  files.push_back("scree.csv");
  files.push_back("scree.svg");
}

int cmd_fit(const FitArgs& a, int threads, const std::string& config, std::ostream& out)
{
  const auto dir = ensure_dir(a.out);
  write_text_file((dir / "effective_config.toml").string(), config);
  const std::vector<double> data = read_column_csv(a.input);
  const NoiseModel noise = NoiseModel::parse(a.noise);
  FitOptions o = fit_options(a, threads);
  o.lambda = LambdaChoice::parse(a.lambda);
  o.probabilities = a.probabilities;

  std::vector<std::string> files{ "effective_config.toml" };
  DensityEstimate est = [&] {
    try {
      return fit(data, noise, o);
    } catch (const SelectionRequiredError& e) {
      write_scree(dir, e.curve(), e.lambda_sure(), files);
      throw;
    }
  }();

  if (est.diagnostics.scree)
    write_scree(dir, *est.diagnostics.scree, est.lambda_used, files);
  if (a.sure_plot && est.diagnostics.sure) {
    write_text_file((dir / "sure.csv").string(), sure_curve_csv(*est.diagnostics.sure));
    write_text_file((dir / "sure.svg").string(), sure_curve_svg(*est.diagnostics.sure));
    files.push_back("sure.csv");
    files.push_back("sure.svg");
  }

  std::ostringstream q;
  q << "p,quantile\n";
  for (const auto& [p, v] : est.quantiles)
    q << fmt6(p) << ',' << fmt6(v) << '\n';
  write_text_file((dir / "quantiles.csv").string(), q.str());
  files.push_back("quantiles.csv");
  files.push_back("result.json");

  json j = estimate_json(est);
  j["diagnostics"]["files"] = files;
  j["effective_config"] = config;
  write_text_file((dir / "result.json").string(), j.dump(2) + "\n");

  out << "lambda " << fmt6(est.lambda_used) << " (" << to_string(est.regularizer_used) << ")\n";
  for (const auto& w : est.diagnostics.warnings)
    out << "warning: " << w << '\n';
  out << q.str();
  return kExitOk;
}

int cmd_scree(const DataOptions& a, int threads, const std::string& config, std::ostream& out)
{
  const auto dir = ensure_dir(a.out);
  write_text_file((dir / "effective_config.toml").string(), config);
  const std::vector<double> data = read_column_csv(a.input);
  const NoiseModel noise = NoiseModel::parse(a.noise);
  FitOptions o = fit_options(a, threads);

  Eigen::VectorXd ref;
  DeconProblem problem = build_problem(data, noise, o, &ref);
  SelectionOptions sel;
  sel.mode = o.sure_mode;
  sel.full_penalty = o.full_penalty;
  sel.threads = threads;
  SureCurve sure = [&] {
    if (!o.regularizer) {
      RegularizerSelection rs = select_regularizer(problem, ref, o.lambda_grid, sel);
      problem.regularizer = rs.kind == RegularizerKind::SecondDerivative
                              ? Regularizer::second_derivative()
                              : Regularizer::gaussian(ref);
      return rs.chosen();
    }
    return select_lambda(problem, o.lambda_grid, sel);
  }();
  const ScreeCurve scree = scree_curve(problem, o.lambda_grid, sel);
  std::vector<std::string> files{ "effective_config.toml" };
  write_scree(dir, scree, sure.chosen_lambda, files);
  files.push_back("scree.json");

  json j;
  j["regularizer"] = to_string(scree.regularizer);
  j["lambda_sure"] = sure.chosen_lambda;
  if (scree.elbow_lambda)
    j["elbow_lambda"] = *scree.elbow_lambda;
  j["lambdas"] = vec_json(scree.lambdas);
  j["q"] = vec_json(scree.q_values);
  j["err"] = vec_json(scree.err);
  j["files"] = files;
  j["effective_config"] = config;
  write_text_file((dir / "scree.json").string(), j.dump(2) + "\n");

  out << "lambda_SURE " << fmt6(sure.chosen_lambda) << " (" << to_string(scree.regularizer) << ")\n";
  if (scree.elbow_lambda)
    out << "elbow " << fmt6(*scree.elbow_lambda) << " (advisory)\n";
  return kExitOk;
}

std::vector<double> range_grid(const std::vector<double>& r, bool log_spaced, const char* what)
{
  if (r.size() != 3 || r[2] < 1 || r[2] != std::floor(r[2]))
    throw DeconError(ErrorKind::InvalidSpec, std::string(what) + " expects lo,hi,count");
  const int count = static_cast<int>(r[2]);
  if (log_spaced)
    return log_grid(r[0], r[1], count);
  if (!(r[1] >= r[0]))
    throw DeconError(ErrorKind::InvalidSpec, std::string(what) + " needs lo <= hi");
  std::vector<double> g;
  for (int i = 0; i < count; ++i)
    g.push_back(count == 1 ? r[0] : r[0] + (r[1] - r[0]) * i / (count - 1));
  return g;
}

int cmd_simulate(const SimulateArgs& a, int threads, const std::string& config, std::ostream& out)
{
  SimulationSpec spec;
  spec.truth = Distribution::parse(a.dist);
  spec.noise = NoiseModel::parse(a.noise);
  spec.n = a.n;
  spec.reps = a.reps;
  spec.seed = a.seed;
  spec.probabilities = a.probabilities;
  spec.bins = a.bins;
  spec.lambda_grid = log_grid(a.lambda_min, a.lambda_max, a.lambda_count);
  spec.oracle_lambda_grid = range_grid(a.oracle_lambda_range, true, "--oracle-lambda-grid");
  spec.oracle_h_grid = range_grid(a.oracle_h_range, false, "--oracle-h-grid");
  spec.sure_mode = parse_sure_mode(a.sure_mode);
  spec.threads = threads;
  spec.correlation_points = a.correlation_points;
  for (std::string m : split_method_list(a.methods)) {
    const auto brace = m.find('}');
    const bool has_param = m.find('@', brace == std::string::npos ? 0 : brace) != std::string::npos;
    if (!has_param) {
      const bool kd = m.rfind("kd-", 0) == 0;
      const auto slash = m.find('/', brace == std::string::npos ? 0 : brace);
      const std::string suffix = "@" + (kd ? a.h : a.lambda);
      if (slash == std::string::npos)
        m += suffix;
      else
        m.insert(slash, suffix);
    }
    spec.methods.push_back(MethodSpec::parse(m, spec.truth));
  }
  if (spec.methods.empty())
    throw DeconError(ErrorKind::InvalidSpec, "no methods given");

  const SimulationReport rep = run_simulation(spec);
  const auto dir = ensure_dir(a.out);
  std::vector<std::string> files{ "effective_config.toml", "report.json", "mae_table.csv",
                                  "pdf_decomp.csv" };
  write_text_file((dir / "effective_config.toml").string(), config);

  std::ostringstream mae;
  mae << "p";
  for (const auto& m : rep.methods)
    mae << ',' << m.method;
  mae << '\n';
  for (std::size_t i = 0; i < rep.probabilities.size(); ++i) {
    mae << fmt6(rep.probabilities[i]);
    for (const auto& m : rep.methods)
      mae << ',' << fmt6(1e3 * m.mae[i]);
    mae << '\n';
  }
  mae << "aggregate";
  for (const auto& m : rep.methods)
    mae << ',' << fmt6(1e3 * m.aggregate);
  mae << '\n';
  write_text_file((dir / "mae_table.csv").string(), mae.str());

  std::ostringstream pd;
  pd << "method,p,x,true_pdf,bias,sd,rmse\n";
  for (const auto& m : rep.methods)
    for (std::size_t i = 0; i < rep.probabilities.size(); ++i)
      pd << m.method << ',' << fmt6(rep.probabilities[i]) << ',' << fmt6(rep.true_quantiles[i]) << ','
         << fmt6(rep.true_pdf_at_quantiles[i]) << ',' << fmt6(m.bias[i]) << ',' << fmt6(m.sd[i])
         << ',' << fmt6(m.rmse[i]) << '\n';
  write_text_file((dir / "pdf_decomp.csv").string(), pd.str());

  json j;
  j["distribution"] = spec.truth.describe();
  j["noise"] = spec.noise.describe();
  j["n"] = spec.n;
  j["reps"] = spec.reps;
  j["seed"] = spec.seed;
  j["probabilities"] = vec_json(rep.probabilities);
  j["true_quantiles"] = vec_json(rep.true_quantiles);
  j["true_pdf_at_quantiles"] = vec_json(rep.true_pdf_at_quantiles);
  j["correlation_points"] = vec_json(rep.correlation_points);
  json methods = json::array();
  std::vector<std::string> written;
  for (const auto& m : rep.methods) {
    const std::string corr = "corr_" + safe_name(m.method) + ".csv";
    if (std::find(written.begin(), written.end(), corr) == written.end()) {
      std::ostringstream cs;
      cs << "x";
      for (double x : rep.correlation_points)
        cs << ',' << fmt6(x);
      cs << '\n';
      for (Eigen::Index r = 0; r < m.correlation.rows(); ++r) {
        cs << fmt6(rep.correlation_points[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < m.correlation.cols(); ++c)
          cs << ',' << fmt6(m.correlation(r, c));
        cs << '\n';
      }
      write_text_file((dir / corr).string(), cs.str());
      written.push_back(corr);
      files.push_back(corr);
    }
    json mj;
    mj["method"] = m.method;
    mj["parameter_rule"] = m.parameter_rule;
    mj["parameter"] = std::isfinite(m.parameter) ? json(m.parameter) : json(nullptr);
    if (!m.regularizer.empty())
      mj["regularizer"] = m.regularizer;
    mj["mae"] = vec_json(m.mae);
    mj["aggregate_mae"] = m.aggregate;
    mj["l1"] = { { "mean", m.l1_mean }, { "median", m.l1_median },
                 { "outlier_fraction", m.l1_outlier_fraction } };
    mj["pdf_bias"] = vec_json(m.bias);
    mj["pdf_sd"] = vec_json(m.sd);
    mj["pdf_rmse"] = vec_json(m.rmse);
    if (m.lambda_summary)
      mj["lambda_sure"] = { { "median", m.lambda_summary->median },
                            { "mode", m.lambda_summary->mode },
                            { "min", m.lambda_summary->min },
                            { "max", m.lambda_summary->max } };
    mj["max_violation"] = m.max_violation;
    mj["zero_columns"] = std::count(m.zero_columns.begin(), m.zero_columns.end(), 1);
    mj["failures"] = m.failures;
    mj["failure_messages"] = m.failure_messages;
    if (!m.oracle_trace.empty()) {
      json t = json::array();
      for (const auto& [v, agg] : m.oracle_trace)
        t.push_back({ v, agg });
      mj["oracle_trace"] = t;
    }
    mj["replicate_parameter"] = vec_json(m.lambdas);
    mj["replicate_l1"] = vec_json(m.l1);
    mj["correlation_file"] = corr;
    methods.push_back(mj);
  }
  j["methods"] = methods;
  j["files"] = files;
  j["effective_config"] = config;
  write_text_file((dir / "report.json").string(), j.dump(2) + "\n");

  out << "MAE x 1e3 (" << spec.truth.describe() << ", " << spec.noise.describe() << ", n=" << spec.n
      << ", reps=" << spec.reps << ")\n";
  out << std::setw(10) << "p";
  for (const auto& m : rep.methods)
    out << std::setw(std::max<int>(12, static_cast<int>(m.method.size()) + 2)) << m.method;
  out << '\n';
  for (std::size_t i = 0; i < rep.probabilities.size(); ++i) {
    out << std::setw(10) << fmt6(rep.probabilities[i]);
    for (const auto& m : rep.methods)
      out << std::setw(std::max<int>(12, static_cast<int>(m.method.size()) + 2)) << fmt6(1e3 * m.mae[i]);
    out << '\n';
  }
  out << std::setw(10) << "aggregate";
  for (const auto& m : rep.methods)
    out << std::setw(std::max<int>(12, static_cast<int>(m.method.size()) + 2)) << fmt6(1e3 * m.aggregate);
  out << '\n';
  for (const auto& m : rep.methods)
    if (m.failures > 0)
      out << m.method << ": " << m.failures << " failed replicate(s), see report.json\n";
  return kExitOk;
}

void add_data_options(CLI::App* sub, DataOptions& a)
{
  sub->add_option("--input", a.input, "CSV file with one column of observations")->required();
  sub->add_option("--noise", a.noise, "gaussian:sigma2=<v> | laplace:scale=<v> | table:<path>")
    ->required();
  sub->add_option("--constraints", a.constraints,
                  "in,mright:x,mleft:x,cright:x,cleft:x,u:x|auto,s:lo,hi")
    ->capture_default_str();
  sub->add_option("--regularizer", a.regularizer, "d2 | gauss | auto")->capture_default_str();
  sub->add_option("--bins", a.bins, "grid size K (0: round(min(200, 3 sqrt(n))))")
    ->capture_default_str();
  sub->add_option("--lambda-min", a.lambda_min)->capture_default_str();
  sub->add_option("--lambda-max", a.lambda_max)->capture_default_str();
  sub->add_option("--lambda-count", a.lambda_count)->capture_default_str();
  sub->add_option("--sure-mode", a.sure_mode, "constraints used for the SURE fits: all | equality")
    ->capture_default_str();
  sub->add_flag("--full-penalty", a.full_penalty, "keep the off-diagonal multinomial term");
  sub->add_option("--out", a.out, "output directory")->capture_default_str();
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Density deconvolution by constrained quadratic programming" };
  app.set_config("--config", "", "TOML file whose [fit]/[scree]/[simulate] sections mirror the flags");
  app.require_subcommand(1);
  int threads = default_thread_count();
  app.add_option("--threads", threads, "worker threads")->envname("QPDECON_THREADS");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "estimate the density of X from noisy observations");
  add_data_options(fit_cmd, fit_args);
  fit_cmd->add_option("--lambda", fit_args.lambda, "sure | scree | scree:<v> | <v>")->capture_default_str();
  fit_cmd->add_option("--probabilities", fit_args.probabilities)->delimiter(',')->capture_default_str();
  fit_cmd->add_flag("--sure-plot", fit_args.sure_plot, "write sure.csv and sure.svg");

  DataOptions scree_args;
  auto* scree_cmd = app.add_subcommand("scree", "write the scree curve with lambda_SURE and the elbow");
  add_data_options(scree_cmd, scree_args);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo comparison of estimators");
  // --h is the bandwidth flag here, so help is long-form only.
  sim_cmd->set_help_flag("--help", "print this help message and exit");
  sim_cmd->add_option("--dist", sim.dist, "gamma:<shape>,<rate> | exp:<rate> | normal:<mean>,<var>")
    ->capture_default_str();
  sim_cmd->add_option("--noise", sim.noise)->capture_default_str();
  sim_cmd->add_option("--n", sim.n)->capture_default_str();
  sim_cmd->add_option("--reps", sim.reps)->capture_default_str();
  sim_cmd->add_option("--methods", sim.methods,
                      "comma list of qp-retro, qp-in[c][m][u][s], qp{...}, kd-rect, kd-triw "
                      "with optional @<param> and /<regularizer>")
    ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
  sim_cmd->add_option("--probabilities", sim.probabilities)->delimiter(',')->capture_default_str();
  sim_cmd->add_option("--bins", sim.bins)->capture_default_str();
  sim_cmd->add_option("--lambda", sim.lambda, "default QP parameter: sure | oracle | <v>")
    ->capture_default_str();
  sim_cmd->add_option("--h", sim.h, "default kernel bandwidth: rule | oracle | <v>")->capture_default_str();
  sim_cmd->add_option("--lambda-min", sim.lambda_min)->capture_default_str();
  sim_cmd->add_option("--lambda-max", sim.lambda_max)->capture_default_str();
  sim_cmd->add_option("--lambda-count", sim.lambda_count)->capture_default_str();
  sim_cmd->add_option("--sure-mode", sim.sure_mode)->capture_default_str();
  sim_cmd->add_option("--oracle-lambda-grid", sim.oracle_lambda_range, "lo,hi,count (log spaced)")
    ->delimiter(',')
    ->capture_default_str();
  sim_cmd->add_option("--oracle-h-grid", sim.oracle_h_range, "lo,hi,count")
    ->delimiter(',')
    ->capture_default_str();
  sim_cmd->add_option("--correlation-points", sim.correlation_points)->capture_default_str();
  sim_cmd->add_option("--out", sim.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (threads < 1)
    threads = 1;

  const std::string config = app.config_to_str(true, false);
  try {
    if (fit_cmd->parsed())
      return cmd_fit(fit_args, threads, config, out);
    if (scree_cmd->parsed())
      return cmd_scree(scree_args, threads, config, out);
    return cmd_simulate(sim, threads, config, out);
  } catch (const DeconError& e) {
    err << "error: " << e.what() << '\n';
    if (e.kind() == ErrorKind::InvalidSpec)
      err << app.help();
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

} // namespace qpdecon
