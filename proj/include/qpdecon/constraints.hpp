#pragma once

#include "qpdecon/discretize.hpp"

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace qpdecon {

// All row builders return matrices A (one constraint per row, K columns)
// that encode A f >= 0. Grid indices are 0-based.

enum class MonotoneDirection
{
  NonincreasingRight, //!< f_j >= f_{j+1} for j >= index
  NondecreasingLeft   //!< f_j <= f_{j+1} for j + 1 <= index
};

enum class TailSide
{
  Right,
  Left
};

Eigen::MatrixXd monotone_rows(int K, int index, MonotoneDirection direction);

//! Rows with the (1, -2, 1) pattern. Right: one row for every triple starting
//! at or after `index`. Left: every triple ending at or before `index`.
Eigen::MatrixXd convex_rows(int K, int index, TailSide side);

//! Nondecreasing up to `mode`, nonincreasing from `mode` on (K-1 rows).
Eigen::MatrixXd unimodal_rows(int K, int mode);

//! Inclusive index range [a, b] the density is restricted to.
struct SupportRange
{
  int a;
  int b;
  int size() const { return b - a + 1; }
};

//! Validates the interval; throws EmptySupport when b <= a.
SupportRange make_support(int K, int a, int b);

//! Columns a..b of `m`.
Eigen::MatrixXd apply_support(const Eigen::MatrixXd& m, SupportRange range);

//! Restricts constraint rows to the kept columns (dropped variables are zero)
//! and removes rows left without any nonzero entry.
Eigen::MatrixXd restrict_rows(const Eigen::MatrixXd& rows, SupportRange range);

//! Mode handling for unimodality.
enum class ModeKind
{
  None,
  Known,
  Search
};

//! Constraint set on a concrete grid. Integrate-to-one and nonnegativity are
//! always part of it.
struct ConstraintSet
{
  int K{ 0 };
  double delta{ 1.0 };
  std::optional<int> monotone_right_from;
  std::optional<int> monotone_left_until;
  std::optional<int> convex_right_from;
  std::optional<int> convex_left_until;
  ModeKind mode_kind{ ModeKind::None };
  int mode_index{ 0 };
  std::optional<SupportRange> support;
  //! Cleared only for the equality-only problem used by the closed form.
  bool nonneg{ true };

  static ConstraintSet basic(int K, double delta);

  //! Shape rows (monotone, convex, unimodal) over all K columns. In Search
  //! mode the unimodal block is built for `mode_override`.
  Eigen::MatrixXd shape_rows(std::optional<int> mode_override = std::nullopt) const;

  SupportRange support_range() const;
  bool has_shape_rows() const;
  std::string describe() const;
};

//! Largest violation of any declared constraint by the full-length vector f
//! (zero when feasible). Covers integrate-to-one, nonnegativity, shape rows
//! and zeros outside the support.
double max_violation(const ConstraintSet& set, const Eigen::VectorXd& f,
                     std::optional<int> mode = std::nullopt);

constexpr double kFeasibilityTol = 1e-9;

//! Coordinate-based constraint description as given on the command line:
//! comma-separated tokens "in", "mright:<x>", "mleft:<x>", "cright:<x>",
//! "cleft:<x>", "u:<x>", "u:auto", "s:<lo>,<hi>" ("inf"/"-inf" allowed).
struct ConstraintSpec
{
  std::optional<double> mright;
  std::optional<double> mleft;
  std::optional<double> cright;
  std::optional<double> cleft;
  std::optional<double> mode;
  bool mode_auto{ false };
  std::optional<std::pair<double, double>> support;

  static ConstraintSpec parse(const std::string& text);
  std::string to_string() const;

  //! Snaps every location to the nearest grid index.
  ConstraintSet resolve(const Grid& grid) const;
};

} // namespace qpdecon
