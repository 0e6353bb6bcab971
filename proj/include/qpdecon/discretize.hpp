#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <string>
#include <variant>

namespace qpdecon {

//! Equally spaced support points x1, x1 + delta, ..., xK. Indices are 0-based.
class Grid
{
public:
  Grid(double x1, double xK, int K);

  double x1() const { return x1_; }
  double xK() const { return xK_; }
  int size() const { return K_; }
  double delta() const { return delta_; }
  double point(int j) const { return x1_ + j * delta_; }
  Eigen::VectorXd points() const;

  //! Nearest grid index to `x`, clamped to [0, K-1]. Exact half-way ties
  //! round toward the grid center.
  int snap(double x) const;

private:
  double x1_;
  double xK_;
  int K_;
  double delta_;
};

//! Histogram estimate of f_Y on a grid, on the density scale.
struct HistogramDensity
{
  Grid grid;
  Eigen::VectorXd heights;
  long n;
};

struct GaussianNoise
{
  double sigma2;
};

struct LaplaceNoise
{
  double scale;
};

//! Piecewise-linear density through the table points, zero outside.
struct TabulatedNoise
{
  Eigen::VectorXd u;
  Eigen::VectorXd density;
};

class NoiseModel
{
public:
  using Kind = std::variant<GaussianNoise, LaplaceNoise, TabulatedNoise>;

  explicit NoiseModel(Kind kind);

  static NoiseModel gaussian(double sigma2);
  static NoiseModel laplace(double scale);
  static NoiseModel tabulated(Eigen::VectorXd u, Eigen::VectorXd density);

  //! Parses "gaussian:sigma2=<v>", "laplace:scale=<v>" or "table:<path>".
  static NoiseModel parse(const std::string& spec);

  double pdf(double u) const;
  std::complex<double> cf(double omega) const;
  double variance() const;
  double stddev() const;
  std::string describe() const;

  const Kind& kind() const { return kind_; }

private:
  Kind kind_;
  double variance_{ 0.0 };
};

struct ConvolutionMatrix
{
  Grid grid;
  Eigen::MatrixXd entries;
};

//! round(min(200, 3 sqrt(n))), at least 3.
int default_bin_count(long n);

Grid build_grid(std::span<const double> data, int K);

HistogramDensity histogram(std::span<const double> data, const Grid& grid);

//! entries(i, j) = delta * f_Z(x_i - x_j). The offset is formed as
//! (i - j) * delta so the result is exactly Toeplitz.
ConvolutionMatrix convolution_matrix(const Grid& grid, const NoiseModel& noise);

} // namespace qpdecon
