#include "qpdecon/discretize.hpp"

#include "qpdecon/error.hpp"
#include "qpdecon/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qpdecon {

Grid::Grid(double x1, double xK, int K)
  : x1_(x1)
  , xK_(xK)
  , K_(K)
  , delta_(K > 1 ? (xK - x1) / (K - 1) : 0.0)
{
  if (K < 3)
    throw DeconError(ErrorKind::GridTooSmall,
                     "grid needs at least 3 points, got " + std::to_string(K));
  if (!(xK > x1) || !std::isfinite(x1) || !std::isfinite(xK))
    throw DeconError(ErrorKind::DegenerateData, "grid requires xK > x1");
}

Eigen::VectorXd Grid::points() const
{
  Eigen::VectorXd x(K_);
  for (int j = 0; j < K_; ++j)
    x(j) = point(j);
  return x;
}

int Grid::snap(double x) const
{
  if (x <= x1_)
    return 0;
  if (x >= xK_)
    return K_ - 1;
  const double pos = (x - x1_) / delta_;
  const double lo = std::floor(pos);
  const double frac = pos - lo;
  int j;
  if (frac < 0.5) {
    j = static_cast<int>(lo);
  } else if (frac > 0.5) {
    j = static_cast<int>(lo) + 1;
  } else {
    const double center = 0.5 * (K_ - 1);
    if (std::abs(lo + 1.0 - center) < std::abs(lo - center))
      j = static_cast<int>(lo) + 1;
    else
      j = static_cast<int>(lo);
  }
  return std::clamp(j, 0, K_ - 1);
}

int default_bin_count(long n)
{
  if (n < 1)
    throw DeconError(ErrorKind::DegenerateData, "sample size must be positive");
  const double k = std::min(200.0, 3.0 * std::sqrt(static_cast<double>(n)));
  return std::max(3, static_cast<int>(std::lround(k)));
}

Grid build_grid(std::span<const double> data, int K)
{
  if (data.empty())
    throw DeconError(ErrorKind::DegenerateData, "no observations");
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  if (!(*hi > *lo))
    throw DeconError(ErrorKind::DegenerateData,
                     "all observations are equal; the grid has zero range");
  return Grid(*lo, *hi, K);
}

HistogramDensity histogram(std::span<const double> data, const Grid& grid)
{
  if (data.empty())
    throw DeconError(ErrorKind::DegenerateData, "no observations");
  const int K = grid.size();
  const double d = grid.delta();
  const double lo = grid.x1() - 0.5 * d;
  const double hi = grid.xK() + 0.5 * d;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
  for (double y : data) {
    if (!(y >= lo && y <= hi))
      throw DeconError(ErrorKind::OutOfRange,
                       "observation " + std::to_string(y) +
                         " lies outside the grid bins");
    // bins are [x_j - d/2, x_j + d/2); the last one is closed on the right
    int j = static_cast<int>(std::floor((y - grid.x1()) / d + 0.5));
    j = std::clamp(j, 0, K - 1);
    counts(j) += 1.0;
  }
  const double n = static_cast<double>(data.size());
  return HistogramDensity{ grid, counts / (n * d), static_cast<long>(data.size()) };
}

ConvolutionMatrix convolution_matrix(const Grid& grid, const NoiseModel& noise)
{
  const int K = grid.size();
  const double d = grid.delta();
  // one pdf evaluation per diagonal offset keeps the matrix exactly Toeplitz
  Eigen::VectorXd by_offset(2 * K - 1);
  for (int k = -(K - 1); k <= K - 1; ++k)
    by_offset(k + K - 1) = d * noise.pdf(k * d);
  Eigen::MatrixXd C(K, K);
  for (int j = 0; j < K; ++j)
    for (int i = 0; i < K; ++i)
      C(i, j) = by_offset(i - j + K - 1);
  return ConvolutionMatrix{ grid, std::move(C) };
}

// ---------------------------------------------------------------------------
// NoiseModel

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

struct Moments
{
  double mass{ 0 }, mean{ 0 }, second{ 0 };
};

// Simpson is exact on each linear segment for u^k f(u), k <= 2.
Moments table_moments(const TabulatedNoise& t)
{
  Moments m;
  for (Eigen::Index s = 0; s + 1 < t.u.size(); ++s) {
    const double a = t.u(s), b = t.u(s + 1);
    const double fa = t.density(s), fb = t.density(s + 1);
    const double c = 0.5 * (a + b), fc = 0.5 * (fa + fb);
    const double w = (b - a) / 6.0;
    m.mass += w * (fa + 4 * fc + fb);
    m.mean += w * (a * fa + 4 * c * fc + b * fb);
    m.second += w * (a * a * fa + 4 * c * c * fc + b * b * fb);
  }
  if (m.mass > 0) {
    m.mean /= m.mass;
    m.second /= m.mass;
  }
  return m;
}

std::complex<double> segment_cf(double a, double b, double fa, double fb,
                                double w)
{
  using namespace std::complex_literals;
  const double h = b - a;
  if (std::abs(w * h) < 0.1) {
    // 5-point Gauss-Legendre, exact for the polynomial part
    static constexpr double nodes[5] = { -0.9061798459386640, -0.5384693101056831,
                                         0.0, 0.5384693101056831,
                                         0.9061798459386640 };
    static constexpr double weights[5] = { 0.2369268850561891, 0.4786286704993665,
                                           0.5688888888888889, 0.4786286704993665,
                                           0.2369268850561891 };
    std::complex<double> acc = 0.0;
    for (int k = 0; k < 5; ++k) {
      const double t = 0.5 * (nodes[k] + 1.0);
      const double u = a + t * h;
      acc += weights[k] * (fa + t * (fb - fa)) * std::exp(1i * w * u);
    }
    return 0.5 * h * acc;
  }
  // f(u) = fa + s (u - a); integrate f(u) e^{i w u} by parts
  const double s = (fb - fa) / h;
  const std::complex<double> ea = std::exp(1i * w * a), eb = std::exp(1i * w * b);
  const std::complex<double> iw = 1i * w;
  return (fb * eb - fa * ea) / iw - s * (eb - ea) / (iw * iw);
}

} // namespace

NoiseModel::NoiseModel(Kind kind)
  : kind_(std::move(kind))
{
  if (auto* g = std::get_if<GaussianNoise>(&kind_)) {
    if (!(g->sigma2 > 0))
      throw DeconError(ErrorKind::InvalidSpec, "gaussian noise needs sigma2 > 0");
    variance_ = g->sigma2;
  } else if (auto* l = std::get_if<LaplaceNoise>(&kind_)) {
    if (!(l->scale > 0))
      throw DeconError(ErrorKind::InvalidSpec, "laplace noise needs scale > 0");
    variance_ = 2.0 * l->scale * l->scale;
  } else {
    auto& t = std::get<TabulatedNoise>(kind_);
    if (t.u.size() < 2 || t.u.size() != t.density.size())
      throw DeconError(ErrorKind::InvalidSpec,
                       "noise table needs at least two (u, density) rows");
    for (Eigen::Index s = 0; s < t.u.size(); ++s) {
      if (t.density(s) < 0)
        throw DeconError(ErrorKind::InvalidSpec, "noise table has a negative density");
      if (s > 0 && !(t.u(s) > t.u(s - 1)))
        throw DeconError(ErrorKind::InvalidSpec,
                         "noise table abscissae must be strictly increasing");
    }
    const Moments m = table_moments(t);
    variance_ = std::max(0.0, m.second - m.mean * m.mean);
  }
}

NoiseModel NoiseModel::gaussian(double sigma2)
{
  return NoiseModel(GaussianNoise{ sigma2 });
}

NoiseModel NoiseModel::laplace(double scale)
{
  return NoiseModel(LaplaceNoise{ scale });
}

NoiseModel NoiseModel::tabulated(Eigen::VectorXd u, Eigen::VectorXd density)
{
  return NoiseModel(TabulatedNoise{ std::move(u), std::move(density) });
}

NoiseModel NoiseModel::parse(const std::string& spec)
{
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw DeconError(ErrorKind::InvalidSpec, "noise spec '" + spec + "' lacks ':'");
  const std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  auto value_of = [&](const std::string& key) {
    const std::string prefix = key + "=";
    if (rest.rfind(prefix, 0) != 0)
      throw DeconError(ErrorKind::InvalidSpec,
                       "noise spec '" + spec + "' expects " + prefix + "<real>");
    try {
      std::size_t used = 0;
      const std::string v = rest.substr(prefix.size());
      const double x = std::stod(v, &used);
      if (used != v.size())
        throw std::invalid_argument(v);
      return x;
    } catch (const std::logic_error&) {
      throw DeconError(ErrorKind::InvalidSpec, "bad number in noise spec '" + spec + "'");
    }
  };
  if (kind == "gaussian")
    return gaussian(value_of("sigma2"));
  if (kind == "laplace")
    return laplace(value_of("scale"));
  if (kind == "table") {
    auto [u, f] = read_table_csv(rest);
    return tabulated(std::move(u), std::move(f));
  }
  throw DeconError(ErrorKind::InvalidSpec, "unknown noise kind '" + kind + "'");
}

double NoiseModel::pdf(double u) const
{
  if (auto* g = std::get_if<GaussianNoise>(&kind_))
    return kInvSqrt2Pi / std::sqrt(g->sigma2) * std::exp(-0.5 * u * u / g->sigma2);
  if (auto* l = std::get_if<LaplaceNoise>(&kind_))
    return 0.5 / l->scale * std::exp(-std::abs(u) / l->scale);
  const auto& t = std::get<TabulatedNoise>(kind_);
  const Eigen::Index m = t.u.size();
  if (u < t.u(0) || u > t.u(m - 1))
    return 0.0;
  const auto* begin = t.u.data();
  const auto* it = std::upper_bound(begin, begin + m, u);
  Eigen::Index s = std::clamp<Eigen::Index>((it - begin) - 1, 0, m - 2);
  const double a = t.u(s), b = t.u(s + 1);
  const double w = (u - a) / (b - a);
  return (1.0 - w) * t.density(s) + w * t.density(s + 1);
}

std::complex<double> NoiseModel::cf(double omega) const
{
  if (auto* g = std::get_if<GaussianNoise>(&kind_))
    return std::exp(-0.5 * g->sigma2 * omega * omega);
  if (auto* l = std::get_if<LaplaceNoise>(&kind_))
    return 1.0 / (1.0 + l->scale * l->scale * omega * omega);
  const auto& t = std::get<TabulatedNoise>(kind_);
  std::complex<double> acc = 0.0;
  for (Eigen::Index s = 0; s + 1 < t.u.size(); ++s)
    acc += segment_cf(t.u(s), t.u(s + 1), t.density(s), t.density(s + 1), omega);
  return acc;
}

double NoiseModel::variance() const
{
  return variance_;
}

double NoiseModel::stddev() const
{
  return std::sqrt(variance_);
}

std::string NoiseModel::describe() const
{
  if (auto* g = std::get_if<GaussianNoise>(&kind_))
    return "gaussian:sigma2=" + fmt6(g->sigma2);
  if (auto* l = std::get_if<LaplaceNoise>(&kind_))
    return "laplace:scale=" + fmt6(l->scale);
  return "table:" + std::to_string(std::get<TabulatedNoise>(kind_).u.size()) + " rows";
}

} // namespace qpdecon
