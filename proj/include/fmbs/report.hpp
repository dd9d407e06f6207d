#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fmbs/error.hpp"
#include "fmbs/eval.hpp"
#include "fmbs/solver/admm.hpp"

namespace fmbs {

struct NamedCurve {
  std::string name;
  ErrorCurve curve;
};

struct NamedHistory {
  std::string name;
  std::vector<ResidualRecord> history;
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

inline void check_written(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw IoError("write failed for " + path.string());
}

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;
};

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Self-contained line plot. Nonpositive values are dropped on a log axis.
inline std::string svg_plot(const std::string& title, const std::string& xlabel, const std::vector<Series>& series,
                            bool log_y) {
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && !(s.y[i] > 0.0)) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x1 >= x0)) x0 = 0, x1 = 1;
  if (!(y1 >= y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << std::setprecision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << svg_escape(title) << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    const double sx = L + (W - L - R) * i / 4.0;
    const double sy = H - B - (H - T - B) * i / 4.0;
    o << "<text x=\"" << sx << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fx << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << (log_y ? "1e" : "") << fy << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << svg_escape(xlabel) << "</text>\n";
  int legend = 0;
  for (const auto& s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && !(s.y[i] > 0.0)) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    o << "\"/>\n";
    const double ly = T + 16 + 16 * legend++;
    o << "<line x1=\"" << W - R - 130 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R - 110 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R - 104 << "\" y=\"" << ly << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << svg_escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline const char* palette(size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  return colors[i % 7];
}

}  // namespace detail

inline void write_curve_csv(const ErrorCurve& c, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "threshold,fraction\n";
  for (size_t i = 0; i < c.thresholds.size(); ++i) out << c.thresholds[i] << ',' << c.fractions[i] << '\n';
  detail::check_written(out, path);
}

inline ErrorCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "threshold,fraction") throw IoError(path.string() + ": bad curve header");
  ErrorCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(path.string() + ": malformed row '" + line + "'");
    try {
      c.thresholds.push_back(std::stod(line.substr(0, comma)));
      c.fractions.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw IoError(path.string() + ": malformed row '" + line + "'");
    }
  }
  return c;
}

inline void write_history_csv(const std::vector<ResidualRecord>& h, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "iter,energy,primal,dual,rho\n";
  for (const auto& r : h) out << r.iter << ',' << r.energy << ',' << r.primal << ',' << r.dual << ',' << r.rho << '\n';
  detail::check_written(out, path);
}

inline std::vector<ResidualRecord> read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "iter,energy,primal,dual,rho") {
    throw IoError(path.string() + ": bad history header");
  }
  std::vector<ResidualRecord> h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    ResidualRecord r;
    if (!(row >> r.iter >> r.energy >> r.primal >> r.dual >> r.rho)) {
      throw IoError(path.string() + ": malformed row");
    }
    h.push_back(r);
  }
  return h;
}

/// Residual panel: energy (normalized by its first value), primal and dual
/// residuals against iteration, log scale.
inline std::string history_svg(const NamedHistory& h) {
  detail::Series e{"energy / energy(1)", detail::palette(0), {}, {}};
  detail::Series p{"primal", detail::palette(1), {}, {}};
  detail::Series d{"dual", detail::palette(2), {}, {}};
  const double e0 = h.history.empty() ? 1.0 : h.history.front().energy;
  for (const auto& r : h.history) {
    const auto it = static_cast<double>(r.iter);
    e.x.push_back(it);
    e.y.push_back(e0 != 0.0 ? r.energy / e0 : r.energy);
    p.x.push_back(it);
    p.y.push_back(r.primal);
    d.x.push_back(it);
    d.y.push_back(r.dual);
  }
  return detail::svg_plot(h.name, "iteration", {e, p, d}, true);
}

inline std::string curves_svg(const std::string& title, const std::vector<NamedCurve>& curves) {
  std::vector<detail::Series> s;
  for (size_t i = 0; i < curves.size(); ++i) {
    s.push_back({curves[i].name, detail::palette(i), curves[i].curve.thresholds, curves[i].curve.fractions});
  }
  return detail::svg_plot(title, "normalized geodesic error", s, false);
}

/// Writes <name>.csv and <name>.svg per curve and per history into out_dir,
/// plus index.txt listing every file written (one per line).
inline std::vector<std::filesystem::path> emit_report(const std::vector<NamedCurve>& curves,
                                                      const std::vector<NamedHistory>& histories,
                                                      const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto svg = [&](const std::filesystem::path& path, const std::string& text) {
    auto out = detail::open_out(path);
    out << text;
    detail::check_written(out, path);
    written.push_back(path);
  };
  for (const auto& c : curves) {
    const auto csv = out_dir / ("curve_" + c.name + ".csv");
    write_curve_csv(c.curve, csv);
    written.push_back(csv);
    svg(out_dir / ("curve_" + c.name + ".svg"), curves_svg(c.name, {c}));
  }
  for (const auto& h : histories) {
    const auto csv = out_dir / ("residuals_" + h.name + ".csv");
    write_history_csv(h.history, csv);
    written.push_back(csv);
    svg(out_dir / ("residuals_" + h.name + ".svg"), history_svg(h));
  }
  const auto index = out_dir / "index.txt";
  auto out = detail::open_out(index);
  for (const auto& p : written) out << p.filename().string() << '\n';
  detail::check_written(out, index);
  return written;
}

}  // namespace fmbs
