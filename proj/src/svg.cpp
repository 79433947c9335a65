#include "modal_attrib/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace modal_attrib::svg {

namespace {

constexpr double kWidth = 720;
constexpr double kLeft = 200;  // room for feature labels
constexpr double kRight = 30;
constexpr double kTop = 40;
constexpr double kBottom = 50;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Axis {
  double lo;
  double hi;
  double px_lo;
  double px_hi;

  double map(double v) const {
    if (hi == lo) return (px_lo + px_hi) / 2;
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

// Pads a data range by 5% and keeps zero visible.
Axis make_axis(double lo, double hi, double px_lo, double px_hi, bool include_zero) {
  if (include_zero) {
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
  }
  if (!(hi > lo)) {
    lo -= 1;
    hi += 1;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, px_lo, px_hi};
}

std::string header(double height, std::string_view title) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(height)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title) << "</text>\n";
  return out.str();
}

void x_ticks(std::ostringstream& out, const Axis& ax, double y, std::string_view label) {
  out << "<line x1=\"" << num(ax.px_lo) << "\" y1=\"" << num(y) << "\" x2=\"" << num(ax.px_hi)
      << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double px = ax.map(v);
    out << "<line x1=\"" << num(px) << "\" y1=\"" << num(y) << "\" x2=\"" << num(px) << "\" y2=\""
        << num(y + 4) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(px) << "\" y=\"" << num(y + 16) << "\" text-anchor=\"middle\">"
        << num(v) << "</text>\n";
  }
  out << "<text x=\"" << num((ax.px_lo + ax.px_hi) / 2) << "\" y=\"" << num(y + 34)
      << "\" text-anchor=\"middle\">" << escape(label) << "</text>\n";
}

void y_ticks(std::ostringstream& out, const Axis& ay, double x) {
  out << "<line x1=\"" << num(x) << "\" y1=\"" << num(ay.px_lo) << "\" x2=\"" << num(x) << "\" y2=\""
      << num(ay.px_hi) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    const double py = ay.map(v);
    out << "<line x1=\"" << num(x - 4) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x) << "\" y2=\""
        << num(py) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << num(x - 6) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << num(v)
        << "</text>\n";
  }
}

// Blue (0) to red (1).
std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(30 + 225 * t));
  const int g = static_cast<int>(std::lround(100 - 70 * std::abs(2 * t - 1)));
  const int b = static_cast<int>(std::lround(255 - 225 * t));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string forest(const std::vector<FeatureBeta>& betas, std::string_view title) {
  const double row_h = 22;
  const double height = kTop + kBottom + row_h * static_cast<double>(std::max<std::size_t>(betas.size(), 1));
  double lo = 0, hi = 0;
  for (const auto& b : betas) {
    lo = std::min({lo, b.beta_shap, b.ci_lo});
    hi = std::max({hi, b.beta_shap, b.ci_hi});
  }
  const Axis ax = make_axis(lo, hi, kLeft, kWidth - kRight, true);
  std::ostringstream out;
  out << header(height, title);
  const double zero = ax.map(0.0);
  out << "<line x1=\"" << num(zero) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(zero)
      << "\" y2=\"" << num(height - kBottom) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const auto& b = betas[i];
    const double y = kTop + row_h * (static_cast<double>(i) + 0.5);
    const char* color = b.beta_shap >= 0 ? "#c0392b" : "#2c6fbb";
    out << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
        << escape(b.feature) << "</text>\n"
        << "<line x1=\"" << num(ax.map(b.ci_lo)) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(ax.map(b.ci_hi)) << "\" y2=\"" << num(y) << "\" stroke=\"" << color << "\"/>\n"
        << "<circle cx=\"" << num(ax.map(b.beta_shap)) << "\" cy=\"" << num(y)
        << "\" r=\"4\" fill=\"" << color << "\"/>\n";
  }
  x_ticks(out, ax, height - kBottom + 4, "beta_shap");
  out << "</svg>\n";
  return out.str();
}

std::string beeswarm(const std::vector<BeeswarmRecord>& records, std::string_view title) {
  std::vector<std::string> features;
  std::map<std::string, std::vector<const BeeswarmRecord*>> by_feature;
  double lo = 0, hi = 0;
  for (const auto& r : records) {
    auto [it, inserted] = by_feature.try_emplace(r.feature);
    if (inserted) features.push_back(r.feature);
    it->second.push_back(&r);
    lo = std::min(lo, r.phi);
    hi = std::max(hi, r.phi);
  }
  const double row_h = 36;
  const double height = kTop + kBottom + row_h * static_cast<double>(std::max<std::size_t>(features.size(), 1));
  const Axis ax = make_axis(lo, hi, kLeft, kWidth - kRight, true);
  std::ostringstream out;
  out << header(height, title);
  const double zero = ax.map(0.0);
  out << "<line x1=\"" << num(zero) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(zero)
      << "\" y2=\"" << num(height - kBottom) << "\" stroke=\"#888\"/>\n";
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double y = kTop + row_h * (static_cast<double>(i) + 0.5);
    auto pts = by_feature[features[i]];
    out << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
        << escape(features[i]) << "</text>\n";
    double vlo = pts.front()->feature_value, vhi = vlo;
    for (const auto* p : pts) {
      vlo = std::min(vlo, p->feature_value);
      vhi = std::max(vhi, p->feature_value);
    }
    std::stable_sort(pts.begin(), pts.end(), [](const auto* a, const auto* b) { return a->phi < b->phi; });
    // bin by pixel column, alternate above and below the row center
    std::map<long, int> column_count;
    for (const auto* p : pts) {
      const double px = ax.map(p->phi);
      const int k = column_count[std::lround(px / 3)]++;
      const double offset = (k % 2 == 0 ? 1 : -1) * 1.5 * ((k + 1) / 2);
      if (std::abs(offset) > row_h / 2 - 3) continue;
      const double t = vhi > vlo ? (p->feature_value - vlo) / (vhi - vlo) : 0.5;
      out << "<circle cx=\"" << num(px) << "\" cy=\"" << num(y + offset) << "\" r=\"1.6\" fill=\""
          << ramp(t) << "\"/>\n";
    }
  }
  x_ticks(out, ax, height - kBottom + 4, "SHAP value (impact on model output)");
  out << "</svg>\n";
  return out.str();
}

std::string quadrant(const std::vector<ScatterPoint>& points, const QuadrantReport& report) {
  const double height = 480;
  double xlo = 0, xhi = 100, plo = 0, phi = 0;
  for (const auto& p : points) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    plo = std::min(plo, p.phi_xy);
    phi = std::max(phi, p.phi_xy);
  }
  const double left = 90;
  const Axis ax{xlo, xhi, left, kWidth - 170};
  const Axis ay = make_axis(plo, phi, height - kBottom, kTop, true);
  static constexpr const char* kColors[4] = {"#2c6fbb", "#27ae60", "#e67e22", "#c0392b"};

  std::ostringstream out;
  out << header(height, "Interaction (" + report.feature_x + ", " + report.feature_y + "): " +
                            std::string(to_string(report.pattern)));
  const double x0 = ax.map(report.x0);
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(x0) << "\" y2=\""
      << num(height - kBottom) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  const double zero = ay.map(0.0);
  out << "<line x1=\"" << num(ax.px_lo) << "\" y1=\"" << num(zero) << "\" x2=\"" << num(ax.px_hi)
      << "\" y2=\"" << num(zero) << "\" stroke=\"#ccc\"/>\n";
  for (const auto& p : points) {
    const int q = 2 * (p.x > report.x0 ? 1 : 0) + (p.y > report.y0 ? 1 : 0);
    out << "<circle cx=\"" << num(ax.map(p.x)) << "\" cy=\"" << num(ay.map(p.phi_xy))
        << "\" r=\"1.6\" fill=\"" << kColors[q] << "\" fill-opacity=\"0.6\"/>\n";
  }
  x_ticks(out, ax, height - kBottom + 4, report.feature_x);
  y_ticks(out, ay, ax.px_lo);
  out << "<text x=\"20\" y=\"" << num((kTop + height - kBottom) / 2) << "\" transform=\"rotate(-90 20 "
      << num((kTop + height - kBottom) / 2) << ")\" text-anchor=\"middle\">SHAP interaction ("
      << escape(report.feature_x) << ", " << escape(report.feature_y) << ")</text>\n";
  // legend with per-quadrant slopes
  const double lx = kWidth - 160;
  for (std::size_t q = 0; q < 4; ++q) {
    const auto& fit = report.quadrants[q];
    const double ly = kTop + 20 + 20 * static_cast<double>(q);
    const std::string slope = fit.status == QuadrantStatus::ok ? num(fit.beta) : std::string(to_string(fit.status));
    out << "<circle cx=\"" << num(lx) << "\" cy=\"" << num(ly - 4) << "\" r=\"4\" fill=\"" << kColors[q]
        << "\"/>\n<text x=\"" << num(lx + 10) << "\" y=\"" << num(ly) << "\">" << kQuadrantLabels[q]
        << " beta=" << escape(slope) << "</text>\n";
  }
  out << "<text x=\"" << num(lx) << "\" y=\"" << num(kTop + 110) << "\">x0=" << num(report.x0)
      << " y0=" << num(report.y0) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace modal_attrib::svg
