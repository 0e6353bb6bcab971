#include "qpdecon/constraints.hpp"

#include "qpdecon/error.hpp"
#include "qpdecon/io.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace qpdecon {

namespace {

void require_index(bool ok, const std::string& what)
{
  if (!ok)
    throw DeconError(ErrorKind::IndexOutOfGrid, what);
}

Eigen::MatrixXd stack(const std::vector<Eigen::MatrixXd>& blocks, int K)
{
  Eigen::Index rows = 0;
  for (const auto& b : blocks)
    rows += b.rows();
  Eigen::MatrixXd out(rows, K);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

} // namespace

Eigen::MatrixXd monotone_rows(int K, int index, MonotoneDirection direction)
{
  if (direction == MonotoneDirection::NonincreasingRight) {
    require_index(index >= 0 && index <= K - 2,
                  "nonincreasing-right start " + std::to_string(index) +
                    " outside [0, K-2]");
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(K - 1 - index, K);
    for (int j = index; j <= K - 2; ++j) {
      A(j - index, j) = 1.0;
      A(j - index, j + 1) = -1.0;
    }
    return A;
  }
  require_index(index >= 1 && index <= K - 1,
                "nondecreasing-left end " + std::to_string(index) +
                  " outside [1, K-1]");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(index, K);
  for (int j = 0; j < index; ++j) {
    A(j, j) = -1.0;
    A(j, j + 1) = 1.0;
  }
  return A;
}

Eigen::MatrixXd convex_rows(int K, int index, TailSide side)
{
  int first, last;
  if (side == TailSide::Right) {
    require_index(index >= 0 && index <= K - 3,
                  "convex-right start " + std::to_string(index) + " outside [0, K-3]");
    first = index;
    last = K - 3;
  } else {
    require_index(index >= 2 && index <= K - 1,
                  "convex-left end " + std::to_string(index) + " outside [2, K-1]");
    first = 0;
    last = index - 2;
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(last - first + 1, K);
  for (int j = first; j <= last; ++j) {
    A(j - first, j) = 1.0;
    A(j - first, j + 1) = -2.0;
    A(j - first, j + 2) = 1.0;
  }
  return A;
}

Eigen::MatrixXd unimodal_rows(int K, int mode)
{
  require_index(mode >= 0 && mode <= K - 1,
                "mode index " + std::to_string(mode) + " outside the grid");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(K - 1, K);
  for (int j = 0; j < K - 1; ++j) {
    const double s = j < mode ? -1.0 : 1.0;
    A(j, j) = s;
    A(j, j + 1) = -s;
  }
  return A;
}

SupportRange make_support(int K, int a, int b)
{
  if (b <= a)
    throw DeconError(ErrorKind::EmptySupport,
                     "support [" + std::to_string(a) + ", " + std::to_string(b) +
                       "] is empty");
  require_index(a >= 0 && b <= K - 1, "support interval outside the grid");
  return SupportRange{ a, b };
}

Eigen::MatrixXd apply_support(const Eigen::MatrixXd& m, SupportRange range)
{
  return m.middleCols(range.a, range.size());
}

Eigen::MatrixXd restrict_rows(const Eigen::MatrixXd& rows, SupportRange range)
{
  const Eigen::MatrixXd kept = rows.middleCols(range.a, range.size());
  std::vector<Eigen::Index> nonzero;
  for (Eigen::Index r = 0; r < kept.rows(); ++r)
    if ((kept.row(r).array() != 0.0).any())
      nonzero.push_back(r);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(nonzero.size()), kept.cols());
  for (std::size_t k = 0; k < nonzero.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = kept.row(nonzero[k]);
  return out;
}

ConstraintSet ConstraintSet::basic(int K, double delta)
{
  ConstraintSet s;
  s.K = K;
  s.delta = delta;
  return s;
}

Eigen::MatrixXd ConstraintSet::shape_rows(std::optional<int> mode_override) const
{
  std::vector<Eigen::MatrixXd> blocks;
  if (monotone_right_from)
    blocks.push_back(monotone_rows(K, *monotone_right_from,
                                   MonotoneDirection::NonincreasingRight));
  if (monotone_left_until)
    blocks.push_back(monotone_rows(K, *monotone_left_until,
                                   MonotoneDirection::NondecreasingLeft));
  if (convex_right_from)
    blocks.push_back(convex_rows(K, *convex_right_from, TailSide::Right));
  if (convex_left_until)
    blocks.push_back(convex_rows(K, *convex_left_until, TailSide::Left));
  if (mode_override)
    blocks.push_back(unimodal_rows(K, *mode_override));
  else if (mode_kind == ModeKind::Known)
    blocks.push_back(unimodal_rows(K, mode_index));
  return stack(blocks, K);
}

SupportRange ConstraintSet::support_range() const
{
  return support ? *support : SupportRange{ 0, K - 1 };
}

bool ConstraintSet::has_shape_rows() const
{
  return monotone_right_from || monotone_left_until || convex_right_from ||
         convex_left_until || mode_kind != ModeKind::None;
}

std::string ConstraintSet::describe() const
{
  std::ostringstream os;
  os << "in";
  if (monotone_right_from)
    os << ",mright@" << *monotone_right_from;
  if (monotone_left_until)
    os << ",mleft@" << *monotone_left_until;
  if (convex_right_from)
    os << ",cright@" << *convex_right_from;
  if (convex_left_until)
    os << ",cleft@" << *convex_left_until;
  if (mode_kind == ModeKind::Known)
    os << ",u@" << mode_index;
  else if (mode_kind == ModeKind::Search)
    os << ",u@auto";
  if (support)
    os << ",s@" << support->a << ".." << support->b;
  return os.str();
}

double max_violation(const ConstraintSet& set, const Eigen::VectorXd& f,
                     std::optional<int> mode)
{
  if (f.size() != set.K)
    throw DeconError(ErrorKind::DimensionMismatch, "vector length differs from K");
  double worst = std::abs(set.delta * f.sum() - 1.0);
  if (set.nonneg)
    worst = std::max(worst, std::max(0.0, -f.minCoeff()));
  if (mode || set.mode_kind != ModeKind::Search) {
    const Eigen::MatrixXd A = set.shape_rows(mode);
    if (A.rows() > 0)
      worst = std::max(worst, std::max(0.0, -(A * f).minCoeff()));
  }
  if (set.support) {
    for (int j = 0; j < set.K; ++j)
      if (j < set.support->a || j > set.support->b)
        worst = std::max(worst, std::abs(f(j)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// ConstraintSpec

namespace {

double parse_coordinate(const std::string& text, const std::string& token)
{
  if (text == "inf" || text == "+inf")
    return std::numeric_limits<double>::infinity();
  if (text == "-inf")
    return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size())
      return v;
  } catch (const std::logic_error&) {
  }
  throw DeconError(ErrorKind::InvalidSpec, "bad coordinate in constraint '" + token + "'");
}

std::string coord(double v)
{
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  return fmt6(v);
}

} // namespace

ConstraintSpec ConstraintSpec::parse(const std::string& text)
{
  std::vector<std::string> tokens;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');)
    if (!tok.empty())
      tokens.push_back(tok);

  ConstraintSpec spec;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const std::string& tok = tokens[k];
    if (tok == "in")
      continue;
    const auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw DeconError(ErrorKind::InvalidSpec, "unknown constraint token '" + tok + "'");
    const std::string key = tok.substr(0, colon);
    const std::string val = tok.substr(colon + 1);
    if (key == "mright")
      spec.mright = parse_coordinate(val, tok);
    else if (key == "mleft")
      spec.mleft = parse_coordinate(val, tok);
    else if (key == "cright")
      spec.cright = parse_coordinate(val, tok);
    else if (key == "cleft")
      spec.cleft = parse_coordinate(val, tok);
    else if (key == "u") {
      if (val == "auto")
        spec.mode_auto = true;
      else
        spec.mode = parse_coordinate(val, tok);
    } else if (key == "s") {
      if (k + 1 >= tokens.size())
        throw DeconError(ErrorKind::InvalidSpec, "support needs 's:<lo>,<hi>'");
      const double lo = parse_coordinate(val, tok);
      const double hi = parse_coordinate(tokens[++k], tok);
      if (!(hi > lo))
        throw DeconError(ErrorKind::EmptySupport, "support upper bound must exceed lower");
      spec.support = { lo, hi };
    } else {
      throw DeconError(ErrorKind::InvalidSpec, "unknown constraint token '" + tok + "'");
    }
  }
  if (spec.mode && spec.mode_auto)
    throw DeconError(ErrorKind::InvalidSpec, "give either u:<x> or u:auto, not both");
  return spec;
}

std::string ConstraintSpec::to_string() const
{
  std::string out = "in";
  if (mright)
    out += ",mright:" + coord(*mright);
  if (mleft)
    out += ",mleft:" + coord(*mleft);
  if (cright)
    out += ",cright:" + coord(*cright);
  if (cleft)
    out += ",cleft:" + coord(*cleft);
  if (mode_auto)
    out += ",u:auto";
  else if (mode)
    out += ",u:" + coord(*mode);
  if (support)
    out += ",s:" + coord(support->first) + "," + coord(support->second);
  return out;
}

ConstraintSet ConstraintSpec::resolve(const Grid& grid) const
{
  const int K = grid.size();
  ConstraintSet set = ConstraintSet::basic(K, grid.delta());
  // a location that leaves no row in range contributes nothing
  if (mright) {
    const int j = grid.snap(*mright);
    if (j <= K - 2)
      set.monotone_right_from = j;
  }
  if (mleft) {
    const int j = grid.snap(*mleft);
    if (j >= 1)
      set.monotone_left_until = j;
  }
  if (cright) {
    const int j = grid.snap(*cright);
    if (j <= K - 3)
      set.convex_right_from = j;
  }
  if (cleft) {
    const int j = grid.snap(*cleft);
    if (j >= 2)
      set.convex_left_until = j;
  }
  if (mode_auto) {
    set.mode_kind = ModeKind::Search;
  } else if (mode) {
    set.mode_kind = ModeKind::Known;
    set.mode_index = grid.snap(*mode);
  }
  if (support) {
    const int a = grid.snap(support->first);
    const int b = grid.snap(support->second);
    if (a > 0 || b < K - 1)
      set.support = make_support(K, a, b);
  }
  return set;
}

} // namespace qpdecon
