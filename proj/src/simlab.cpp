#include "qpdecon/simlab.hpp"

#include "qpdecon/error.hpp"
#include "qpdecon/estimator.hpp"
#include "qpdecon/parallel.hpp"

#include <boost/random/laplace_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace qpdecon {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ConstraintSpec derived_constraints(const std::string& letters, const Distribution& truth,
                                   const std::string& text)
{
  ConstraintSpec c;
  const auto [left_infl, right_infl] = truth.inflection_points();
  const double mode = truth.mode();
  const double lower = truth.lower();
  for (char ch : letters) {
    switch (ch) {
      case 'c':
        if (left_infl)
          c.cleft = *left_infl;
        if (right_infl)
          c.cright = *right_infl;
        break;
      case 'm':
        c.mright = mode;
        if (mode > lower)
          c.mleft = mode;
        break;
      case 'u':
        c.mode_auto = true;
        break;
      case 's':
        if (std::isfinite(lower))
          c.support = std::make_pair(lower, std::numeric_limits<double>::infinity());
        break;
      default:
        throw DeconError(ErrorKind::InvalidSpec, "unknown constraint letter in '" + text + "'");
    }
  }
  return c;
}

} // namespace

MethodSpec MethodSpec::parse(const std::string& text, const Distribution& truth)
{
  MethodSpec m;
  m.text = text;
  std::string base = text;
  std::string param;
  std::string reg;
  // Suffixes of a literal constraint list follow its closing brace.
  const std::size_t close = base.find('}');
  const std::size_t search_from = close == std::string::npos ? 0 : close;
  if (const auto slash = base.find('/', search_from); slash != std::string::npos) {
    reg = base.substr(slash + 1);
    base.erase(slash);
  }
  if (const auto at = base.find('@', search_from); at != std::string::npos) {
    param = base.substr(at + 1);
    base.erase(at);
  }

  if (base == "kd-rect" || base == "kd-triw") {
    m.family = MethodFamily::KD;
    m.kernel = base == "kd-rect" ? KdKernel::Rectangular : KdKernel::Triweight;
    m.rule = ParamRule::Rule;
    m.regularizer.reset();
    if (!reg.empty())
      throw DeconError(ErrorKind::InvalidSpec, "kernel methods take no regularizer: '" + text + "'");
  } else if (base == "qp-retro") {
    m.retro = true;
  } else if (base.rfind("qp-in", 0) == 0) {
    m.constraints = derived_constraints(base.substr(5), truth, text);
  } else if (base.size() > 4 && base.rfind("qp{", 0) == 0 && base.back() == '}') {
    m.constraints = ConstraintSpec::parse(base.substr(3, base.size() - 4));
  } else {
    throw DeconError(ErrorKind::InvalidSpec, "unknown method '" + text + "'");
  }

  if (!param.empty()) {
    if (param == "sure" && m.family == MethodFamily::QP) {
      m.rule = ParamRule::Sure;
    } else if (param == "rule" && m.family == MethodFamily::KD) {
      m.rule = ParamRule::Rule;
    } else if (param == "oracle") {
      m.rule = ParamRule::Oracle;
    } else {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(param, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      const bool ok = used == param.size() && used > 0 && std::isfinite(v) &&
                      (m.family == MethodFamily::QP ? v >= 0 : v > 0);
      if (!ok)
        throw DeconError(ErrorKind::InvalidSpec, "bad parameter in method '" + text + "'");
      m.rule = ParamRule::Fixed;
      m.value = v;
    }
  }
  if (!reg.empty()) {
    if (reg == "auto")
      m.regularizer.reset();
    else
      m.regularizer = regularizer_from_string(reg);
  }
  return m;
}

std::vector<std::string> split_method_list(const std::string& text)
{
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : text) {
    if (ch == '{')
      ++depth;
    else if (ch == '}')
      --depth;
    if (ch == ',' && depth == 0) {
      if (!cur.empty())
        out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur.push_back(ch);
    }
  }
  if (!cur.empty())
    out.push_back(cur);
  return out;
}

SimulationSpec::SimulationSpec()
  : probabilities(default_probabilities())
  , lambda_grid(default_lambda_grid())
  , oracle_lambda_grid(log_grid(1e-4, 1.0, 17))
  , oracle_h_grid()
{
  for (int i = 0; i <= 24; ++i)
    oracle_h_grid.push_back(0.3 + 0.05 * i);
}

double true_quantile(const Distribution& dist, double p)
{
  return dist.quantile(p);
}

Eigen::MatrixXd uncentered_correlation(const Eigen::MatrixXd& V, std::vector<char>* zero_columns)
{
  const Eigen::Index N = V.rows();
  const Eigen::Index P = V.cols();
  Eigen::MatrixXd S = (V.transpose() * V) / static_cast<double>(std::max<Eigen::Index>(N, 1));
  Eigen::VectorXd scale(P);
  std::vector<char> zero(static_cast<std::size_t>(P), 0);
  for (Eigen::Index j = 0; j < P; ++j) {
    if (S(j, j) > 0) {
      scale(j) = 1.0 / std::sqrt(S(j, j));
    } else {
      scale(j) = 0.0;
      zero[static_cast<std::size_t>(j)] = 1;
    }
  }
  Eigen::MatrixXd R = scale.asDiagonal() * S * scale.asDiagonal();
  for (Eigen::Index j = 0; j < P; ++j)
    if (!zero[static_cast<std::size_t>(j)])
      R(j, j) = 1.0;
  R = R.cwiseMax(-1.0).cwiseMin(1.0);
  if (zero_columns)
    *zero_columns = std::move(zero);
  return R;
}

double aggregate_mae(const std::vector<double>& mae, const std::vector<double>& probabilities)
{
  if (mae.size() != probabilities.size())
    throw DeconError(ErrorKind::DimensionMismatch, "one MAE per probability is needed");
  double acc = 0.0;
  for (std::size_t i = 0; i < mae.size(); ++i) {
    const double p = probabilities[i];
    acc += mae[i] / (p * (1.0 - p));
  }
  return acc;
}

double aggregate_mae(const std::vector<double>& mae)
{
  return aggregate_mae(mae, default_probabilities());
}

double median(std::vector<double> values)
{
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty())
    return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 == 1 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

std::vector<double> simulate_observations(const SimulationSpec& spec, int replicate)
{
  const auto n = static_cast<std::size_t>(spec.n);
  StreamRng xr(spec.seed, static_cast<std::uint64_t>(replicate), 0);
  StreamRng zr(spec.seed, static_cast<std::uint64_t>(replicate), 1);
  std::vector<double> y = spec.truth.sample(xr, n);
  if (const auto* g = std::get_if<GaussianNoise>(&spec.noise.kind())) {
    boost::random::normal_distribution<double> d(0.0, std::sqrt(g->sigma2));
    for (auto& v : y)
      v += d(zr);
  } else if (const auto* l = std::get_if<LaplaceNoise>(&spec.noise.kind())) {
    boost::random::laplace_distribution<double> d(0.0, l->scale);
    for (auto& v : y)
      v += d(zr);
  } else {
    throw DeconError(ErrorKind::InvalidSpec, "simulation supports gaussian and laplace noise");
  }
  return y;
}

namespace {

struct Context
{
  std::vector<double> true_q;
  std::vector<double> points; // correlation grid
  std::vector<double> true_at_points;
  double l1_lo{ 0.0 };
  double l1_hi{ 0.0 };
};

Context make_context(const SimulationSpec& spec)
{
  Context c;
  for (double p : spec.probabilities)
    c.true_q.push_back(true_quantile(spec.truth, p));
  const double lo = spec.truth.quantile(0.001);
  const double hi = spec.truth.quantile(0.999);
  const int P = std::max(2, spec.correlation_points);
  for (int i = 0; i < P; ++i) {
    const double x = lo + (hi - lo) * i / (P - 1);
    c.points.push_back(x);
    c.true_at_points.push_back(spec.truth.pdf(x));
  }
  c.l1_lo = std::isfinite(spec.truth.lower()) ? spec.truth.lower() : spec.truth.quantile(1e-6);
  c.l1_hi = spec.truth.quantile(1.0 - 1e-6);
  return c;
}

double piecewise_pdf(const Grid& grid, const Eigen::VectorXd& pdf, double x)
{
  const double d = grid.delta();
  if (x < grid.x1() - 0.5 * d || x >= grid.xK() + 0.5 * d)
    return 0.0;
  const int j = std::clamp(static_cast<int>(std::floor((x - grid.x1()) / d + 0.5)), 0, grid.size() - 1);
  return pdf(j);
}

struct Outcome
{
  bool ok{ false };
  std::string error;
  std::vector<double> q;
  std::vector<double> pdf_at_q;
  std::vector<double> err_at_points;
  double l1{ kNaN };
  double lambda{ kNaN };
  int mode{ -1 };
  double violation{ 0.0 };
};

Outcome evaluate(const SimulationSpec& spec, const MethodSpec& method, const Context& ctx,
                 const std::vector<double>& y)
{
  Outcome out;
  try {
    std::optional<Grid> grid;
    Eigen::VectorXd pdf;
    if (method.family == MethodFamily::KD) {
      const int K = spec.bins > 0 ? spec.bins : default_bin_count(static_cast<long>(y.size()));
      grid = build_grid(y, K);
      KdConfig cfg;
      cfg.kernel = method.kernel;
      cfg.bandwidth = method.rule == ParamRule::Fixed
                        ? method.value
                        : rule_of_thumb_bandwidth(static_cast<long>(y.size()), spec.noise);
      pdf = retro_in(kd_estimate(y, spec.noise, *grid, cfg), grid->delta());
      out.lambda = cfg.bandwidth;
    } else {
      FitOptions opts;
      opts.constraints = method.constraints;
      opts.regularizer = method.regularizer;
      opts.bins = spec.bins;
      opts.lambda_grid = spec.lambda_grid;
      opts.probabilities = {};
      opts.threads = 1;
      if (method.rule == ParamRule::Fixed) {
        opts.lambda.rule = LambdaRule::Fixed;
        opts.lambda.value = method.value;
      } else {
        opts.lambda.rule = LambdaRule::Sure;
      }
      if (method.retro) {
        opts.sure_mode = SureMode::EqualityOnly;
        Eigen::VectorXd ref;
        DeconProblem problem = build_problem(y, spec.noise, opts, &ref);
        SelectionOptions sel;
        sel.mode = SureMode::EqualityOnly;
        double lambda = method.value;
        if (!method.regularizer) {
          const auto grid_l = method.rule == ParamRule::Fixed ? std::vector<double>{ lambda }
                                                              : spec.lambda_grid;
          const RegularizerSelection rs = select_regularizer(problem, ref, grid_l, sel);
          problem.regularizer = rs.kind == RegularizerKind::SecondDerivative
                                  ? Regularizer::second_derivative()
                                  : Regularizer::gaussian(ref);
          lambda = rs.lambda;
        } else if (method.rule != ParamRule::Fixed) {
          lambda = select_lambda(problem, spec.lambda_grid, sel).chosen_lambda;
        }
        problem.lambda = lambda;
        const ClosedFormSolution cf = closed_form_equality(problem);
        grid = problem.fY.grid;
        pdf = retro_in(cf.apply(problem.fY.heights), grid->delta());
        out.lambda = lambda;
      } else {
        opts.sure_mode = spec.sure_mode;
        const DensityEstimate est = fit(y, spec.noise, opts);
        grid = est.grid;
        pdf = est.pdf;
        out.lambda = est.lambda_used;
        out.mode = est.diagnostics.solver.mode_index.value_or(-1);
        out.violation = est.diagnostics.solver.max_violation;
      }
    }

    for (std::size_t i = 0; i < spec.probabilities.size(); ++i) {
      out.q.push_back(quantile(*grid, pdf, spec.probabilities[i]));
      out.pdf_at_q.push_back(piecewise_pdf(*grid, pdf, ctx.true_q[i]));
    }
    for (std::size_t i = 0; i < ctx.points.size(); ++i)
      out.err_at_points.push_back(piecewise_pdf(*grid, pdf, ctx.points[i]) - ctx.true_at_points[i]);

    const double d = grid->delta();
    const double lo = std::min(ctx.l1_lo, grid->x1() - 0.5 * d);
    const double hi = std::max(ctx.l1_hi, grid->xK() + 0.5 * d);
    constexpr int M = 1000;
    double l1 = 0.0;
    double prev = 0.0;
    for (int i = 0; i < M; ++i) {
      const double x = lo + (hi - lo) * i / (M - 1);
      const double v = std::abs(piecewise_pdf(*grid, pdf, x) - spec.truth.pdf(x));
      if (i > 0)
        l1 += 0.5 * (prev + v) * (hi - lo) / (M - 1);
      prev = v;
    }
    out.l1 = l1;
    out.ok = true;
  } catch (const DeconError& e) {
    out.error = e.what();
  }
  return out;
}

std::vector<std::vector<double>> all_observations(const SimulationSpec& spec)
{
  std::vector<std::vector<double>> ys(static_cast<std::size_t>(spec.reps));
  for (int r = 0; r < spec.reps; ++r)
    ys[static_cast<std::size_t>(r)] = simulate_observations(spec, r);
  return ys;
}

std::vector<Outcome> run_method(const SimulationSpec& spec, const MethodSpec& method,
                                const Context& ctx, const std::vector<std::vector<double>>& ys)
{
  std::vector<Outcome> out(ys.size());
  parallel_for(static_cast<int>(ys.size()), spec.threads, [&](int r) {
    out[static_cast<std::size_t>(r)] = evaluate(spec, method, ctx, ys[static_cast<std::size_t>(r)]);
  });
  return out;
}

std::vector<double> mae_of(const std::vector<Outcome>& outcomes, const Context& ctx)
{
  std::vector<double> mae;
  for (std::size_t i = 0; i < ctx.true_q.size(); ++i) {
    std::vector<double> e;
    for (const auto& o : outcomes)
      if (o.ok)
        e.push_back(std::abs(o.q[i] - ctx.true_q[i]));
    mae.push_back(median(std::move(e)));
  }
  return mae;
}

double oracle_search(const SimulationSpec& spec, const MethodSpec& method,
                     const std::vector<double>& grid,
                     std::vector<std::pair<double, double>>* trace)
{
  if (grid.empty())
    throw DeconError(ErrorKind::InvalidSpec, "oracle grid is empty");
  const Context ctx = make_context(spec);
  const auto ys = all_observations(spec);
  double best = grid.front();
  double best_agg = std::numeric_limits<double>::infinity();
  for (double v : grid) {
    MethodSpec m = method;
    m.rule = ParamRule::Fixed;
    m.value = v;
    const double agg = aggregate_mae(mae_of(run_method(spec, m, ctx, ys), ctx), spec.probabilities);
    if (trace)
      trace->emplace_back(v, agg);
    if (agg < best_agg) {
      best_agg = agg;
      best = v;
    }
  }
  return best;
}

std::string rule_name(ParamRule r)
{
  switch (r) {
    case ParamRule::Fixed:
      return "fixed";
    case ParamRule::Sure:
      return "sure";
    case ParamRule::Rule:
      return "rule";
    case ParamRule::Oracle:
      return "oracle";
  }
  return "fixed";
}

MethodReport summarize(const SimulationSpec& spec, const MethodSpec& method,
                       const Context& ctx, const std::vector<Outcome>& outcomes)
{
  MethodReport rep;
  rep.method = method.text;
  rep.parameter_rule = rule_name(method.rule);
  rep.parameter = method.rule == ParamRule::Fixed || method.rule == ParamRule::Oracle
                    ? method.value
                    : kNaN;
  if (method.family == MethodFamily::QP)
    rep.regularizer = method.regularizer ? to_string(*method.regularizer) : "auto";

  const std::size_t P = spec.probabilities.size();
  const auto R = static_cast<Eigen::Index>(outcomes.size());
  rep.quantile_estimates = Eigen::MatrixXd::Constant(R, static_cast<Eigen::Index>(P), kNaN);
  std::vector<const Outcome*> ok;
  for (Eigen::Index r = 0; r < R; ++r) {
    const Outcome& o = outcomes[static_cast<std::size_t>(r)];
    rep.l1.push_back(o.l1);
    rep.lambdas.push_back(o.lambda);
    rep.modes.push_back(o.mode);
    if (!o.ok) {
      ++rep.failures;
      rep.failure_messages.push_back("replicate " + std::to_string(r) + ": " + o.error);
      continue;
    }
    ok.push_back(&o);
    rep.max_violation = std::max(rep.max_violation, o.violation);
    for (std::size_t i = 0; i < P; ++i)
      rep.quantile_estimates(r, static_cast<Eigen::Index>(i)) = o.q[i];
  }
  rep.mae = mae_of(outcomes, ctx);
  rep.aggregate = aggregate_mae(rep.mae, spec.probabilities);

  std::vector<double> l1ok;
  for (const Outcome* o : ok)
    l1ok.push_back(o->l1);
  rep.l1_median = median(l1ok);
  rep.l1_mean = kNaN;
  rep.l1_outlier_fraction = kNaN;
  if (!l1ok.empty()) {
    double sum = 0.0;
    int outliers = 0;
    for (double v : l1ok) {
      sum += v;
      if (v > 3.0 * rep.l1_median)
        ++outliers;
    }
    rep.l1_mean = sum / static_cast<double>(l1ok.size());
    rep.l1_outlier_fraction = static_cast<double>(outliers) / static_cast<double>(l1ok.size());
  }

  const double N = static_cast<double>(ok.size());
  for (std::size_t i = 0; i < P; ++i) {
    if (ok.empty()) {
      rep.bias.push_back(kNaN);
      rep.sd.push_back(kNaN);
      rep.rmse.push_back(kNaN);
      continue;
    }
    const double truth = spec.truth.pdf(ctx.true_q[i]);
    double mean = 0.0;
    for (const Outcome* o : ok)
      mean += o->pdf_at_q[i] - truth;
    mean /= N;
    double var = 0.0;
    for (const Outcome* o : ok) {
      const double e = o->pdf_at_q[i] - truth - mean;
      var += e * e;
    }
    var /= N;
    rep.bias.push_back(mean);
    rep.sd.push_back(std::sqrt(var));
    rep.rmse.push_back(std::sqrt(mean * mean + var));
  }

  Eigen::MatrixXd V(static_cast<Eigen::Index>(ok.size()), static_cast<Eigen::Index>(ctx.points.size()));
  for (std::size_t r = 0; r < ok.size(); ++r)
    for (std::size_t j = 0; j < ctx.points.size(); ++j)
      V(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = ok[r]->err_at_points[j];
  rep.correlation = uncentered_correlation(V, &rep.zero_columns);

  if (method.family == MethodFamily::QP && method.rule == ParamRule::Sure && !ok.empty()) {
    std::vector<double> ls;
    std::map<double, int> counts;
    for (const Outcome* o : ok) {
      ls.push_back(o->lambda);
      ++counts[o->lambda];
    }
    MethodReport::LambdaSummary s;
    s.median = median(ls);
    s.min = *std::min_element(ls.begin(), ls.end());
    s.max = *std::max_element(ls.begin(), ls.end());
    int best = 0;
    for (const auto& [v, c] : counts)
      if (c > best) {
        best = c;
        s.mode = v;
      }
    rep.lambda_summary = s;
  }
  return rep;
}

} // namespace

double oracle_lambda(const SimulationSpec& spec, const MethodSpec& method,
                     const std::vector<double>& grid,
                     std::vector<std::pair<double, double>>* trace)
{
  if (method.family != MethodFamily::QP)
    throw DeconError(ErrorKind::InvalidSpec, "oracle lambda applies to QP methods");
  return oracle_search(spec, method, grid, trace);
}

double oracle_bandwidth(const SimulationSpec& spec, const MethodSpec& method,
                        const std::vector<double>& grid,
                        std::vector<std::pair<double, double>>* trace)
{
  if (method.family != MethodFamily::KD)
    throw DeconError(ErrorKind::InvalidSpec, "oracle bandwidth applies to kernel methods");
  return oracle_search(spec, method, grid, trace);
}

SimulationReport run_simulation(const SimulationSpec& spec)
{
  if (spec.reps < 1)
    throw DeconError(ErrorKind::InvalidSpec, "reps must be at least 1");
  if (spec.n < 2)
    throw DeconError(ErrorKind::InvalidSpec, "n must be at least 2");
  if (spec.methods.empty())
    throw DeconError(ErrorKind::InvalidSpec, "no methods given");

  const Context ctx = make_context(spec);
  SimulationReport report;
  report.probabilities = spec.probabilities;
  report.true_quantiles = ctx.true_q;
  for (double q : ctx.true_q)
    report.true_pdf_at_quantiles.push_back(spec.truth.pdf(q));
  report.correlation_points = ctx.points;

  const auto ys = all_observations(spec);
  std::map<std::string, MethodReport> cache;
  for (const MethodSpec& m0 : spec.methods) {
    if (auto it = cache.find(m0.text); it != cache.end()) {
      report.methods.push_back(it->second);
      continue;
    }
    MethodSpec m = m0;
    std::vector<std::pair<double, double>> trace;
    if (m.rule == ParamRule::Oracle) {
      m.value = m.family == MethodFamily::QP
                  ? oracle_lambda(spec, m, spec.oracle_lambda_grid, &trace)
                  : oracle_bandwidth(spec, m, spec.oracle_h_grid, &trace);
      MethodSpec fixed = m;
      fixed.rule = ParamRule::Fixed;
      MethodReport rep = summarize(spec, m, ctx, run_method(spec, fixed, ctx, ys));
      rep.oracle_trace = std::move(trace);
      cache.emplace(m0.text, rep);
      report.methods.push_back(std::move(rep));
      continue;
    }
    MethodReport rep = summarize(spec, m, ctx, run_method(spec, m, ctx, ys));
    cache.emplace(m0.text, rep);
    report.methods.push_back(std::move(rep));
  }
  return report;
}

} // namespace qpdecon
