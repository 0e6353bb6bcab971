#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace qpdecon {

//! Counter-based generator: output k of stream `key` is a SplitMix64
//! finalizer applied to key + k * golden gamma. Streams for different
//! (seed, replicate, variable) triples are independent of draw order.
class StreamRng
{
public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t replicate, std::uint64_t variable);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  //! Uniform double in (0, 1).
  double uniform();

private:
  std::uint64_t key_;
  std::uint64_t counter_{ 0 };
};

struct GammaDist
{
  double shape;
  double rate;
};

struct ExponentialDist
{
  double rate;
};

struct NormalDist
{
  double mean;
  double var;
};

class Distribution
{
public:
  using Kind = std::variant<GammaDist, ExponentialDist, NormalDist>;

  explicit Distribution(Kind kind);

  //! "gamma:<shape>,<rate>", "exp:<rate>" or "normal:<mean>,<var>".
  static Distribution parse(const std::string& text);

  double pdf(double x) const;
  double cdf(double x) const;
  //! Analytic for exponential and normal; bisection to 1e-10 on the
  //! regularized incomplete gamma otherwise.
  double quantile(double p) const;
  double mean() const;
  double variance() const;
  double mode() const;
  //! Lower support end (-inf for the normal).
  double lower() const;
  //! Inflection points of the pdf, left then right, where they exist.
  std::pair<std::optional<double>, std::optional<double>> inflection_points() const;

  std::vector<double> sample(StreamRng& rng, std::size_t n) const;
  std::string describe() const;

  const Kind& kind() const { return kind_; }

private:
  Kind kind_;
};

} // namespace qpdecon
