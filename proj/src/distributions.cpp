#include "qpdecon/distributions.hpp"

#include "qpdecon/error.hpp"
#include "qpdecon/special.hpp"

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace qpdecon {

namespace {

std::uint64_t mix64(std::uint64_t z)
{
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::vector<double> parse_numbers(const std::string& text, const std::string& what)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size())
      throw DeconError(ErrorKind::InvalidSpec, "bad number '" + item + "' in " + what);
    out.push_back(v);
  }
  return out;
}

} // namespace

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t replicate, std::uint64_t variable)
  : key_(mix64(mix64(mix64(seed) ^ (replicate + kGolden)) ^ (variable * kGolden + 1)))
{
}

StreamRng::result_type StreamRng::operator()()
{
  return mix64(key_ + (++counter_) * kGolden);
}

double StreamRng::uniform()
{
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

Distribution::Distribution(Kind kind)
  : kind_(kind)
{
  if (const auto* g = std::get_if<GammaDist>(&kind_)) {
    if (!(g->shape > 0) || !(g->rate > 0))
      throw DeconError(ErrorKind::InvalidSpec, "gamma needs positive shape and rate");
  } else if (const auto* e = std::get_if<ExponentialDist>(&kind_)) {
    if (!(e->rate > 0))
      throw DeconError(ErrorKind::InvalidSpec, "exponential needs a positive rate");
  } else if (const auto* nd = std::get_if<NormalDist>(&kind_)) {
    if (!(nd->var > 0))
      throw DeconError(ErrorKind::InvalidSpec, "normal needs a positive variance");
  }
}

Distribution Distribution::parse(const std::string& text)
{
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw DeconError(ErrorKind::InvalidSpec, "distribution must look like name:params, got '" + text + "'");
  const std::string name = text.substr(0, colon);
  const std::vector<double> v = parse_numbers(text.substr(colon + 1), text);
  if (name == "gamma" && v.size() == 2)
    return Distribution(GammaDist{ v[0], v[1] });
  if ((name == "exp" || name == "exponential") && v.size() == 1)
    return Distribution(ExponentialDist{ v[0] });
  if (name == "normal" && v.size() == 2)
    return Distribution(NormalDist{ v[0], v[1] });
  throw DeconError(ErrorKind::InvalidSpec, "unknown distribution '" + text + "'");
}

double Distribution::pdf(double x) const
{
  if (const auto* g = std::get_if<GammaDist>(&kind_)) {
    if (x < 0)
      return 0.0;
    if (x == 0)
      return g->shape == 1.0 ? g->rate : (g->shape < 1.0 ? INFINITY : 0.0);
    return std::exp(g->shape * std::log(g->rate) + (g->shape - 1.0) * std::log(x) -
                    g->rate * x - std::lgamma(g->shape));
  }
  if (const auto* e = std::get_if<ExponentialDist>(&kind_))
    return x < 0 ? 0.0 : e->rate * std::exp(-e->rate * x);
  const auto& nd = std::get<NormalDist>(kind_);
  const double z = (x - nd.mean);
  return std::exp(-0.5 * z * z / nd.var) / std::sqrt(2.0 * std::numbers::pi * nd.var);
}

double Distribution::cdf(double x) const
{
  if (const auto* g = std::get_if<GammaDist>(&kind_))
    return x <= 0 ? 0.0 : gamma_p(g->shape, g->rate * x);
  if (const auto* e = std::get_if<ExponentialDist>(&kind_))
    return x <= 0 ? 0.0 : -std::expm1(-e->rate * x);
  const auto& nd = std::get<NormalDist>(kind_);
  return normal_cdf((x - nd.mean) / std::sqrt(nd.var));
}

double Distribution::quantile(double p) const
{
  if (!(p > 0.0 && p < 1.0))
    throw DeconError(ErrorKind::InvalidProbability, "probability must lie in (0, 1)");
  if (const auto* e = std::get_if<ExponentialDist>(&kind_))
    return -std::log1p(-p) / e->rate;
  if (const auto* nd = std::get_if<NormalDist>(&kind_))
    return nd->mean + std::sqrt(nd->var) * normal_quantile(p);
  double hi = std::max(1.0, 2.0 * mean());
  while (cdf(hi) < p)
    hi *= 2.0;
  return bisect_quantile([this](double x) { return cdf(x); }, p, 0.0, hi, 1e-10);
}

double Distribution::mean() const
{
  if (const auto* g = std::get_if<GammaDist>(&kind_))
    return g->shape / g->rate;
  if (const auto* e = std::get_if<ExponentialDist>(&kind_))
    return 1.0 / e->rate;
  return std::get<NormalDist>(kind_).mean;
}

double Distribution::variance() const
{
  if (const auto* g = std::get_if<GammaDist>(&kind_))
    return g->shape / (g->rate * g->rate);
  if (const auto* e = std::get_if<ExponentialDist>(&kind_))
    return 1.0 / (e->rate * e->rate);
  return std::get<NormalDist>(kind_).var;
}

double Distribution::mode() const
{
  if (const auto* g = std::get_if<GammaDist>(&kind_))
    return std::max(0.0, (g->shape - 1.0) / g->rate);
  if (std::holds_alternative<ExponentialDist>(kind_))
    return 0.0;
  return std::get<NormalDist>(kind_).mean;
}

double Distribution::lower() const
{
  if (std::holds_alternative<NormalDist>(kind_))
    return -INFINITY;
  return 0.0;
}

std::pair<std::optional<double>, std::optional<double>> Distribution::inflection_points() const
{
  if (const auto* g = std::get_if<GammaDist>(&kind_)) {
    const double k = g->shape;
    if (k <= 1.0)
      return { std::nullopt, std::nullopt };
    const double r = std::sqrt(k - 1.0);
    std::optional<double> left;
    if (k > 2.0)
      left = (k - 1.0 - r) / g->rate;
    return { left, (k - 1.0 + r) / g->rate };
  }
  if (std::holds_alternative<ExponentialDist>(kind_))
    return { std::nullopt, 0.0 };
  const auto& nd = std::get<NormalDist>(kind_);
  const double s = std::sqrt(nd.var);
  return { nd.mean - s, nd.mean + s };
}

std::vector<double> Distribution::sample(StreamRng& rng, std::size_t n) const
{
  std::vector<double> out(n);
  if (const auto* g = std::get_if<GammaDist>(&kind_)) {
    boost::random::gamma_distribution<double> d(g->shape, 1.0 / g->rate);
    for (auto& x : out)
      x = d(rng);
  } else if (const auto* e = std::get_if<ExponentialDist>(&kind_)) {
    boost::random::exponential_distribution<double> d(e->rate);
    for (auto& x : out)
      x = d(rng);
  } else {
    const auto& nd = std::get<NormalDist>(kind_);
    boost::random::normal_distribution<double> d(nd.mean, std::sqrt(nd.var));
    for (auto& x : out)
      x = d(rng);
  }
  return out;
}

std::string Distribution::describe() const
{
  std::ostringstream os;
  os.precision(15);
  if (const auto* g = std::get_if<GammaDist>(&kind_))
    os << "gamma:" << g->shape << ',' << g->rate;
  else if (const auto* e = std::get_if<ExponentialDist>(&kind_))
    os << "exp:" << e->rate;
  else {
    const auto& nd = std::get<NormalDist>(kind_);
    os << "normal:" << nd.mean << ',' << nd.var;
  }
  return os.str();
}

} // namespace qpdecon
