#include "tsr_cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "tsr/errors.hpp"

namespace tsr::cli {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 190.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::size_t column_index(const CsvTable& t, const std::string& name, const std::filesystem::path& p) {
  const auto it = std::find(t.columns.begin(), t.columns.end(), name);
  if (it == t.columns.end()) throw FormatError(p.string() + ": no column '" + name + "'");
  return static_cast<std::size_t>(it - t.columns.begin());
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      t.columns = split_line(line);
      header = true;
      continue;
    }
    std::vector<std::string> row = split_line(line);
    if (row.size() != t.columns.size()) {
      throw FormatError(path.string() + ": row has " + std::to_string(row.size()) + " cells, header has " +
                        std::to_string(t.columns.size()));
    }
    t.rows.push_back(std::move(row));
  }
  if (!header) throw FormatError(path.string() + ": no header line");
  return t;
}

std::string render_svg(const std::vector<std::filesystem::path>& csv_paths, const PlotOptions& opts) {
  if (csv_paths.empty()) throw ConfigError("plot needs at least one CSV");
  std::vector<Series> series;
  std::vector<std::string> schema;
  for (const auto& p : csv_paths) {
    const CsvTable t = read_csv(p);
    if (schema.empty()) {
      schema = t.columns;
    } else if (t.columns != schema) {
      throw FormatError(p.string() + ": columns differ from " + csv_paths.front().string());
    }
    const std::size_t xi = column_index(t, opts.x_column, p);
    const std::size_t yi = column_index(t, opts.y_column, p);
    Series s;
    s.name = p.stem().string();
    for (const auto& row : t.rows) {
      if (row[xi].empty() || row[yi].empty()) continue;
      const double x = std::stod(row[xi]);
      const double y = std::stod(row[yi]);
      if (!std::isfinite(x) || !std::isfinite(y) || (opts.log_y && !(y > 0.0))) continue;
      s.points.emplace_back(x, opts.log_y ? std::log10(y) : y);
    }
    series.push_back(std::move(s));
  }

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) {
    x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opts.title.empty()) {
    o << "<text x=\"" << f2(kLeft) << "\" y=\"24\" font-size=\"14\">" << escape(opts.title) << "</text>\n";
  }
  o << "<rect x=\"" << f2(kLeft) << "\" y=\"" << f2(kTop) << "\" width=\"" << f2(pw) << "\" height=\""
    << f2(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << f2(sx(xv)) << "\" y=\"" << f2(kHeight - kBottom + 18) << "\" text-anchor=\"middle\">"
      << tick(xv) << "</text>\n";
    o << "<text x=\"" << f2(kLeft - 6) << "\" y=\"" << f2(sy(yv) + 4) << "\" text-anchor=\"end\">"
      << (opts.log_y ? tick(std::pow(10.0, yv)) : tick(yv)) << "</text>\n";
  }
  o << "<text x=\"" << f2(kLeft + pw / 2) << "\" y=\"" << f2(kHeight - 10) << "\" text-anchor=\"middle\">"
    << escape(opts.x_column) << "</text>\n";
  o << "<text x=\"16\" y=\"" << f2(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << f2(kTop + ph / 2) << ")\">" << escape(opts.y_column) << (opts.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[i].points.size(); ++k) {
      if (k > 0) o << ' ';
      o << f2(sx(series[i].points[k].first)) << ',' << f2(sy(series[i].points[k].second));
    }
    o << "\"/>\n";
  }
  o << "<g class=\"legend\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
    const double y = kTop + 10.0 + 18.0 * static_cast<double>(i);
    const double x = kWidth - kRight + 12.0;
    o << "<line x1=\"" << f2(x) << "\" y1=\"" << f2(y) << "\" x2=\"" << f2(x + 20) << "\" y2=\"" << f2(y)
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << f2(x + 26) << "\" y=\"" << f2(y + 4) << "\">" << escape(series[i].name) << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

void emit_plot(const std::vector<std::filesystem::path>& csv_paths, const std::filesystem::path& out_svg,
               const PlotOptions& opts) {
  const std::string svg = render_svg(csv_paths, opts);
  if (out_svg.has_parent_path()) std::filesystem::create_directories(out_svg.parent_path());
  std::ofstream out(out_svg, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + out_svg.string());
  out << svg;
}

}  // namespace tsr::cli
