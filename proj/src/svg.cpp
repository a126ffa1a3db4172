#include "simr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace simr::svg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

void header(std::ostringstream& s, const std::string& title) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
}

void frame(std::ostringstream& s, const std::string& xlabel, const std::string& ylabel) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  s << "<path d=\"M" << x0 << ' ' << y1 << " L" << x0 << ' ' << y0 << " L" << x1 << ' ' << y0
    << "\" stroke=\"black\" fill=\"none\"/>\n";
  s << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(xlabel)
    << "</text>\n";
  s << "<text x=\"18\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << (y0 + y1) / 2 << ")\">" << escape(ylabel) << "</text>\n";
}

}  // namespace

std::string loglog_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                        const std::vector<Series>& series) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.x[i] <= 0 || s.y[i] <= 0) continue;
      xmin = std::min(xmin, std::log10(s.x[i]));
      xmax = std::max(xmax, std::log10(s.x[i]));
      ymin = std::min(ymin, std::log10(s.y[i]));
      ymax = std::max(ymax, std::log10(s.y[i]));
    }
  }
  if (!(xmax > xmin)) {
    xmin = 0;
    xmax = 1;
  }
  if (!(ymax > ymin)) {
    ymin = 0;
    ymax = 1;
  }
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  const double px0 = kLeft, px1 = kWidth - kRight, py0 = kHeight - kBottom, py1 = kTop;
  const auto px = [&](double lx) { return px0 + (lx - xmin) / (xmax - xmin) * (px1 - px0); };
  const auto py = [&](double ly) { return py0 - (ly - ymin) / (ymax - ymin) * (py0 - py1); };

  std::ostringstream s;
  header(s, title);
  frame(s, xlabel, ylabel);
  for (int d = static_cast<int>(ymin); d <= static_cast<int>(ymax); ++d) {
    s << "<path d=\"M" << px0 - 4 << ' ' << num(py(d)) << " L" << px0 << ' ' << num(py(d))
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << px0 - 6 << "\" y=\"" << num(py(d) + 4) << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  for (int d = static_cast<int>(std::ceil(xmin)); d <= static_cast<int>(std::floor(xmax)); ++d) {
    s << "<text x=\"" << num(px(d)) << "\" y=\"" << py0 + 16 << "\" text-anchor=\"middle\">1e" << d << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::ostringstream path;
    bool first = true;
    for (std::size_t i = 0; i < sr.x.size(); ++i) {
      if (sr.x[i] <= 0 || sr.y[i] <= 0) continue;
      path << (first ? "M" : " L") << num(px(std::log10(sr.x[i]))) << ' ' << num(py(std::log10(sr.y[i])));
      first = false;
    }
    if (!first) s << "<path d=\"" << path.str() << "\" stroke=\"" << color << "\" fill=\"none\" stroke-width=\"1.5\"/>\n";
    const double ly = kTop + 16 + 18 * static_cast<double>(k);
    s << "<path d=\"M" << px1 + 12 << ' ' << ly << " L" << px1 + 36 << ' ' << ly << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << px1 + 42 << "\" y=\"" << ly + 4 << "\">" << escape(sr.label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string box_plot(const std::string& title, const std::string& ylabel, const std::vector<Box>& boxes) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& b : boxes) {
    lo = std::min(lo, b.stats.min);
    hi = std::max(hi, b.stats.max);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double px0 = kLeft, px1 = kWidth - kRight, py0 = kHeight - kBottom, py1 = kTop;
  const auto py = [&](double v) { return py0 - (v - lo) / (hi - lo) * (py0 - py1); };

  std::ostringstream s;
  header(s, title);
  frame(s, "", ylabel);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    s << "<text x=\"" << px0 - 6 << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  const double slot = (px1 - px0) / static_cast<double>(std::max<std::size_t>(boxes.size(), 1));
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const auto& b = boxes[k];
    const char* color = kColors[k % std::size(kColors)];
    const double cx = px0 + slot * (static_cast<double>(k) + 0.5), half = slot * 0.25;
    const double fence_lo = b.stats.q1 - 1.5 * (b.stats.q3 - b.stats.q1);
    double wlo = b.stats.q1, whi = b.stats.q3;
    for (double v : b.values) {
      if (v >= fence_lo) wlo = std::min(wlo, v);
      if (v <= b.stats.upper_fence) whi = std::max(whi, v);
    }
    s << "<path d=\"M" << num(cx - half) << ' ' << num(py(b.stats.q3)) << " L" << num(cx + half) << ' '
      << num(py(b.stats.q3)) << " L" << num(cx + half) << ' ' << num(py(b.stats.q1)) << " L" << num(cx - half) << ' '
      << num(py(b.stats.q1)) << " Z\" stroke=\"" << color << "\" fill=\"" << color << "\" fill-opacity=\"0.25\"/>\n";
    s << "<path d=\"M" << num(cx - half) << ' ' << num(py(b.stats.median)) << " L" << num(cx + half) << ' '
      << num(py(b.stats.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s << "<path d=\"M" << num(cx) << ' ' << num(py(b.stats.q3)) << " L" << num(cx) << ' ' << num(py(whi)) << " M"
      << num(cx) << ' ' << num(py(b.stats.q1)) << " L" << num(cx) << ' ' << num(py(wlo)) << "\" stroke=\"" << color
      << "\"/>\n";
    for (double v : b.values) {
      if (v > b.stats.upper_fence || v < fence_lo) {
        s << "<path d=\"M" << num(cx - 3) << ' ' << num(py(v)) << " L" << num(cx + 3) << ' ' << num(py(v))
          << "\" stroke=\"" << color << "\"/>\n";
      }
    }
    s << "<text x=\"" << num(cx) << "\" y=\"" << py0 + 16 << "\" text-anchor=\"middle\">" << escape(b.label)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace simr::svg
