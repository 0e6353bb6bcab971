#include "qpdecon/io.hpp"

#include "qpdecon/error.hpp"
#include "qpdecon/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace qpdecon {

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(trim(item));
  return out;
}

bool to_number(const std::string& s, double& v)
{
  if (s.empty())
    return false;
  std::size_t used = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}

std::vector<std::vector<double>> read_rows(const std::string& path, std::size_t columns)
{
  std::ifstream in(path);
  if (!in)
    throw DeconError(ErrorKind::DegenerateData, "cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty())
      continue;
    const auto fields = split_fields(t);
    std::vector<double> row;
    bool numeric = fields.size() >= columns;
    for (std::size_t i = 0; numeric && i < columns; ++i) {
      double v = 0.0;
      numeric = to_number(fields[i], v) && std::isfinite(v);
      row.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue; // header
      }
      throw DeconError(ErrorKind::DegenerateData,
                       path + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(columns) + " numeric field(s)");
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace

std::vector<double> read_column_csv(const std::string& path)
{
  std::vector<double> out;
  for (const auto& r : read_rows(path, 1))
    out.push_back(r[0]);
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> read_table_csv(const std::string& path)
{
  const auto rows = read_rows(path, 2);
  Eigen::VectorXd a(static_cast<Eigen::Index>(rows.size()));
  Eigen::VectorXd b(a.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    a(static_cast<Eigen::Index>(i)) = rows[i][0];
    b(static_cast<Eigen::Index>(i)) = rows[i][1];
  }
  return { a, b };
}

std::string fmt6(double v)
{
  if (std::isnan(v))
    return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string sure_curve_csv(const SureCurve& curve)
{
  std::ostringstream os;
  os << "lambda,err,penalty,sure\n";
  for (std::size_t i = 0; i < curve.lambdas.size(); ++i)
    os << fmt6(curve.lambdas[i]) << ',' << fmt6(curve.err[i]) << ',' << fmt6(curve.penalty[i])
       << ',' << fmt6(curve.sure[i]) << '\n';
  return os.str();
}

std::string scree_curve_csv(const ScreeCurve& curve)
{
  std::ostringstream os;
  os << "lambda,q\n";
  for (std::size_t i = 0; i < curve.lambdas.size(); ++i)
    os << fmt6(curve.lambdas[i]) << ',' << fmt6(curve.q_values[i]) << '\n';
  return os.str();
}

namespace {

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

} // namespace

std::string svg_line_plot(const std::vector<Series>& series,
                          const std::vector<Guide>& guides,
                          const std::string& title,
                          const std::string& xlabel,
                          const std::string& ylabel,
                          bool log_y)
{
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  auto usable = [&](double x, double y) {
    return x > 0 && std::isfinite(x) && std::isfinite(y) && (!log_y || y > 0);
  };

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], s.y[i]))
        continue;
      xmin = std::min(xmin, std::log10(s.x[i]));
      xmax = std::max(xmax, std::log10(s.x[i]));
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax - xmin <= 0)
    xmax = xmin + 1;
  if (ymax - ymin <= 0) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - ymin) / (ymax - ymin) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(title) << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
     << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int d = static_cast<int>(std::ceil(xmin)); d <= static_cast<int>(std::floor(xmax)); ++d) {
    const double x = px(d);
    os << "<line x1=\"" << num(x) << "\" y1=\"" << H - B << "\" x2=\"" << num(x) << "\" y2=\""
       << H - B + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(x) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">1e"
       << d << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = ymin + (ymax - ymin) * k / 4.0;
    const double y = py(v);
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << num(y) << "\" x2=\"" << L << "\" y2=\"" << num(y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
       << (log_y ? "1e" + fmt6(v) : fmt6(v)) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
     << escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">" << escape(ylabel) << "</text>\n";

  int legend = 0;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (usable(s.x[i], s.y[i]))
        os << num(px(std::log10(s.x[i]))) << ',' << num(py(ty(s.y[i]))) << ' ';
    os << "\"/>\n";
    const double ly = T + 16 + 16 * legend++;
    os << "<line x1=\"" << W - R - 150 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R - 130
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << W - R - 125 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
  }
  for (const auto& g : guides) {
    if (!(g.x > 0))
      continue;
    const double x = px(std::log10(g.x));
    os << "<line x1=\"" << num(x) << "\" y1=\"" << T << "\" x2=\"" << num(x) << "\" y2=\"" << H - B
       << "\" stroke=\"" << g.color << "\" stroke-width=\"1.5\"";
    if (!g.dash.empty())
      os << " stroke-dasharray=\"" << g.dash << "\"";
    os << "/>\n";
    const double ly = T + 16 + 16 * legend++;
    os << "<line x1=\"" << W - R - 150 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R - 130
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << g.color << "\" stroke-width=\"1.5\"";
    if (!g.dash.empty())
      os << " stroke-dasharray=\"" << g.dash << "\"";
    os << "/>\n";
    os << "<text x=\"" << W - R - 125 << "\" y=\"" << ly << "\">" << escape(g.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string sure_curve_svg(const SureCurve& curve)
{
  std::vector<double> err, sure;
  for (std::size_t i = 0; i < curve.lambdas.size(); ++i) {
    err.push_back(curve.err[i]);
    sure.push_back(curve.sure[i]);
  }
  const std::vector<Series> series{ { curve.lambdas, sure, "SURE", "black" },
                                    { curve.lambdas, err, "err", "steelblue" } };
  const std::vector<Guide> guides{ { curve.chosen_lambda, "lambda_SURE = " + fmt6(curve.chosen_lambda),
                                     "6,4", "red" } };
  return svg_line_plot(series, guides, "SURE curve (" + to_string(curve.chosen_regularizer) + ")",
                       "lambda", "value", true);
}

std::string scree_curve_svg(const ScreeCurve& curve, std::optional<double> lambda_sure)
{
  const std::vector<Series> series{ { curve.lambdas, curve.q_values, "Q(f)", "black" } };
  std::vector<Guide> guides;
  if (lambda_sure)
    guides.push_back({ *lambda_sure, "lambda_SURE = " + fmt6(*lambda_sure), "6,4", "red" });
  if (curve.elbow_lambda)
    guides.push_back({ *curve.elbow_lambda, "elbow = " + fmt6(*curve.elbow_lambda), "2,3", "darkgreen" });
  return svg_line_plot(series, guides, "Scree plot (" + to_string(curve.regularizer) + ")", "lambda",
                       "Q(f)", true);
}

void write_text_file(const std::string& path, const std::string& content)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out)
    throw std::runtime_error("failed writing '" + path + "'");
}

} // namespace qpdecon
