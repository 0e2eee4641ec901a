#ifndef FMLOC_RUNNER_RECORD_HPP
#define FMLOC_RUNNER_RECORD_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmloc/core/error.hpp"

namespace fmloc::runner {

using json = nlohmann::json;

enum class PlotScale { none, semilog_y, loglog };

/// One experiment's output: a table (the series) plus a free-form summary.
struct ResultRecord {
  std::string kind;
  std::string digest;
  json config;                        // canonical document
  json summary = json::object();
  std::vector<std::string> columns;
  std::vector<bool> integer_columns;  // printed without exponent
  std::vector<std::vector<double>> rows;

  PlotScale plot = PlotScale::none;
  std::size_t plot_x = 0;
  std::size_t plot_y = 1;

  void add_column(std::string name, bool integer = false) {
    columns.push_back(std::move(name));
    integer_columns.push_back(integer);
  }
};

/// Writes via a temporary file and rename, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& data) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory for '" + path.string() + "': " + ec.message());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << data;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename onto '" + path.string() + "': " + ec.message());
}

/// %.16e: 17 significant digits, enough to round-trip any double.
inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

inline std::string csv_text(const ResultRecord& rec) {
  std::string out;
  for (std::size_t j = 0; j < rec.columns.size(); ++j) {
    if (j) out += ',';
    out += rec.columns[j];
  }
  out += '\n';
  for (const auto& row : rec.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      if (j < rec.integer_columns.size() && rec.integer_columns[j] && std::isfinite(row[j])) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", row[j]);
        out += buf;
      } else {
        out += format_real(row[j]);
      }
    }
    out += '\n';
  }
  return out;
}

inline void emit_csv(const ResultRecord& rec, const std::filesystem::path& path) {
  write_atomic(path, csv_text(rec));
}

/// Non-finite values have no JSON spelling; they are written as strings.
inline json json_real(double x) {
  if (std::isfinite(x)) return x;
  return format_real(x);
}

inline std::string json_text(const ResultRecord& rec) {
  json series = json::array();
  for (const auto& row : rec.rows) {
    json r = json::array();
    for (double x : row) r.push_back(json_real(x));
    series.push_back(std::move(r));
  }
  json doc{{"kind", rec.kind},
           {"config_digest", rec.digest},
           {"config", rec.config},
           {"summary", rec.summary},
           {"columns", rec.columns},
           {"series", std::move(series)}};
  return doc.dump(2) + "\n";
}

inline void emit_json(const ResultRecord& rec, const std::filesystem::path& path) {
  write_atomic(path, json_text(rec));
}

// ---------------------------------------------------------------------------
// SVG

namespace detail {

inline std::string svg_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace detail

/// Standalone SVG line plot of (plot_x, plot_y). Returns the document, or an
/// empty string for records without a plottable series.
inline std::string svg_text(const ResultRecord& rec) {
  if (rec.plot == PlotScale::none || rec.rows.empty()) return {};
  const bool logx = rec.plot == PlotScale::loglog;
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : rec.rows) {
    double x = row.at(rec.plot_x), y = row.at(rec.plot_y);
    if (!(y > 0.0) || !std::isfinite(y) || (logx && !(x > 0.0))) continue;
    pts.emplace_back(logx ? std::log10(x) : x, std::log10(y));
  }
  if (pts.empty()) return {};

  double x0 = pts[0].first, x1 = x0, y0 = pts[0].second, y1 = y0;
  for (auto [x, y] : pts) {
    x0 = std::min(x0, x), x1 = std::max(x1, x);
    y0 = std::min(y0, y), y1 = std::max(y1, y);
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 20, B = 50;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  using detail::svg_num;
  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<!-- config digest: " + rec.digest + " -->\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  s += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  s += "<line x1=\"" + svg_num(L) + "\" y1=\"" + svg_num(H - B) + "\" x2=\"" + svg_num(W - R) + "\" y2=\"" +
       svg_num(H - B) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + svg_num(L) + "\" y1=\"" + svg_num(T) + "\" x2=\"" + svg_num(L) + "\" y2=\"" +
       svg_num(H - B) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0, xv = x0 + (x1 - x0) * i / 4.0;
    char lab[32];
    std::snprintf(lab, sizeof lab, "1e%.2g", yv);
    s += "<text x=\"" + svg_num(L - 6) + "\" y=\"" + svg_num(py(yv) + 4) +
         "\" font-size=\"11\" text-anchor=\"end\">" + lab + "</text>\n";
    if (logx)
      std::snprintf(lab, sizeof lab, "1e%.2g", xv);
    else
      std::snprintf(lab, sizeof lab, "%.3g", xv);
    s += "<text x=\"" + svg_num(px(xv)) + "\" y=\"" + svg_num(H - B + 16) +
         "\" font-size=\"11\" text-anchor=\"middle\">" + lab + "</text>\n";
  }
  s += "<text x=\"" + svg_num((L + W - R) / 2) + "\" y=\"" + svg_num(H - 10) +
       "\" font-size=\"13\" text-anchor=\"middle\">" + rec.columns.at(rec.plot_x) +
       (logx ? " (log)" : "") + "</text>\n";
  s += "<text x=\"16\" y=\"" + svg_num((T + H - B) / 2) + "\" font-size=\"13\" text-anchor=\"middle\" "
       "transform=\"rotate(-90 16 " + svg_num((T + H - B) / 2) + ")\">" + rec.columns.at(rec.plot_y) +
       " (log)</text>\n";
  s += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ' ';
    s += svg_num(px(pts[i].first)) + "," + svg_num(py(pts[i].second));
  }
  s += "\"/>\n";
  for (auto [x, y] : pts)
    s += "<circle cx=\"" + svg_num(px(x)) + "\" cy=\"" + svg_num(py(y)) + "\" r=\"3\" fill=\"steelblue\"/>\n";
  s += "</svg>\n";
  return s;
}

/// Writes the plot; returns false (and writes nothing) when the record has no
/// plottable series.
inline bool emit_plot(const ResultRecord& rec, const std::filesystem::path& path) {
  const auto text = svg_text(rec);
  if (text.empty()) return false;
  write_atomic(path, text);
  return true;
}

}  // namespace fmloc::runner

#endif  // FMLOC_RUNNER_RECORD_HPP
