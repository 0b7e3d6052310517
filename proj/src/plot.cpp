#include "noisylab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "noisylab/metrics.hpp"

namespace noisylab {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 800, kHeight = 500;
constexpr double kLeft = 70, kRight = 190, kTop = 30, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
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

// Basenames, widened to the parent directory when two inputs collide.
std::vector<std::string> labels_for(const std::vector<fs::path>& paths) {
  std::vector<std::string> names;
  for (const auto& p : paths) names.push_back(p.filename().string());
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (std::count(names.begin(), names.end(), names[i]) > 1) {
      for (std::size_t j = 0; j < paths.size(); ++j) {
        if (paths[j].filename() == paths[i].filename()) {
          names[j] = (paths[j].parent_path().filename() / paths[j].filename()).string();
        }
      }
    }
  }
  return names;
}

}  // namespace

std::string render_plot(const std::vector<fs::path>& histories, const std::vector<std::string>& columns) {
  if (histories.empty()) throw std::invalid_argument("plot: no history files");
  if (columns.empty()) throw std::invalid_argument("plot: no columns");
  for (const auto& c : columns) {
    if (std::find(kHistoryColumns.begin(), kHistoryColumns.end(), c) == kHistoryColumns.end()) {
      throw std::invalid_argument("plot: unknown column '" + c + "'");
    }
  }
  std::vector<MetricsHistory> data;
  for (const auto& p : histories) data.push_back(read_history(p));

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& h : data) {
    for (const auto& r : h.records) {
      x0 = std::min<double>(x0, r.epoch);
      x1 = std::max<double>(x1, r.epoch);
      for (const auto& c : columns) {
        y0 = std::min(y0, r.column(c));
        y1 = std::max(y1, r.column(c));
      }
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y0 -= 0.5, y1 += 0.5;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\" width=\"800\" height=\"500\" "
         "font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  svg += "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
         num(kTop + ph) + "\"/>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(kTop + ph) +
         "\"/>\n";
  svg += "</g>\n<g class=\"ticks\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
    svg += "<text x=\"" + num(sx(xv)) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" + tick(xv) +
           "</text>\n";
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(sy(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) +
           "</text>\n";
  }
  svg += "</g>\n";
  std::string ylabel;
  for (std::size_t i = 0; i < columns.size(); ++i) ylabel += (i ? ", " : "") + columns[i];
  svg += "<text class=\"xlabel\" x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 15) +
         "\" text-anchor=\"middle\">epoch</text>\n";
  svg += "<text class=\"ylabel\" x=\"18\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num(kTop + ph / 2) + ")\">" + escape(ylabel) + "</text>\n";

  const auto names = labels_for(histories);
  std::string legend = "<g class=\"legend\">\n";
  std::size_t series = 0;
  for (std::size_t f = 0; f < data.size(); ++f) {
    for (const auto& c : columns) {
      const char* color = kPalette[series % std::size(kPalette)];
      std::string points;
      for (const auto& r : data[f].records) {
        if (!points.empty()) points += ' ';
        points += num(sx(r.epoch)) + ',' + num(sy(r.column(c)));
      }
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + points +
             "\"/>\n";
      const double ly = kTop + 10 + 18.0 * static_cast<double>(series);
      const double lx = kWidth - kRight + 15;
      legend += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 20) + "\" y2=\"" + num(ly) +
                "\" stroke=\"" + color + "\" stroke-width=\"2\"/>";
      legend += "<text class=\"legend-entry\" x=\"" + num(lx + 26) + "\" y=\"" + num(ly + 4) + "\">" +
                escape(names[f] + " " + c) + "</text>\n";
      ++series;
    }
  }
  svg += legend + "</g>\n</svg>\n";
  return svg;
}

void emit_plot(const std::vector<fs::path>& histories, const fs::path& svg, const std::vector<std::string>& columns) {
  const std::string text = render_plot(histories, columns);
  std::ofstream os(svg, std::ios::binary);
  if (!os) throw std::runtime_error(svg.string() + ": cannot open for writing");
  os << text;
  if (!os) throw std::runtime_error(svg.string() + ": write failed");
}

}  // namespace noisylab
