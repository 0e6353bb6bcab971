#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace qpdecon {

struct SureCurve;
struct ScreeCurve;

//! Reads a single numeric column; a non-numeric first line is taken as a
//! header. Blank lines are skipped.
std::vector<double> read_column_csv(const std::string& path);

//! Reads a two-column numeric table (header optional).
std::pair<Eigen::VectorXd, Eigen::VectorXd> read_table_csv(const std::string& path);

//! Six significant digits, the CSV convention.
std::string fmt6(double v);

std::string sure_curve_csv(const SureCurve& curve);
std::string scree_curve_csv(const ScreeCurve& curve);

struct Guide
{
  double x;
  std::string label;
  std::string dash; // SVG stroke-dasharray, empty for solid
  std::string color;
};

struct Series
{
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
  std::string color;
};

//! Static SVG line plot with a log10 x axis. `log_y` switches the y axis to
//! log10 as well (non-positive values are dropped).
std::string svg_line_plot(const std::vector<Series>& series,
                          const std::vector<Guide>& guides,
                          const std::string& title,
                          const std::string& xlabel,
                          const std::string& ylabel,
                          bool log_y);

std::string sure_curve_svg(const SureCurve& curve);
std::string scree_curve_svg(const ScreeCurve& curve,
                            std::optional<double> lambda_sure);

void write_text_file(const std::string& path, const std::string& content);

} // namespace qpdecon
