#include "riskbench/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "riskbench/common.hpp"

namespace riskbench {
namespace {

constexpr const char* kFont = "Helvetica,Arial,sans-serif";
constexpr const char* kLowColor = "#1a9850";   // green, low marker value
constexpr const char* kHighColor = "#d73027";  // red, high marker value
constexpr const char* kPushUpColor = "#d73027";
constexpr const char* kPushDownColor = "#2166ac";

const char* kPalette[] = {"#2166ac", "#b2182b", "#1b7837", "#762a83", "#e08214"};
constexpr size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fx(double v) { return format_fixed(v, 4); }

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

std::string svg_open(double width, double height) {
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fx(width) +
                    "\" height=\"" + fx(height) + "\" viewBox=\"0 0 " + fx(width) + " " +
                    fx(height) + "\" font-family=\"" + std::string(kFont) + "\">\n";
  out += "<rect width=\"" + fx(width) + "\" height=\"" + fx(height) + "\" fill=\"#ffffff\"/>\n";
  return out;
}

std::string comment_block(const std::string& comment) {
  if (comment.empty()) return {};
  std::string safe = comment;
  size_t pos = 0;
  while ((pos = safe.find("--", pos)) != std::string::npos) safe.replace(pos, 2, "- -");
  return "<!-- " + safe + " -->\n";
}

std::string text(double x, double y, const std::string& s, int size, const std::string& fill,
                 const std::string& anchor = "start", const std::string& extra = {}) {
  std::string out = "<text x=\"" + fx(x) + "\" y=\"" + fx(y) + "\" font-size=\"" +
                    std::to_string(size) + "\" fill=\"" + fill + "\"";
  if (anchor != "start") out += " text-anchor=\"" + anchor + "\"";
  if (!extra.empty()) out += " " + extra;
  out += ">" + xml_escape(s) + "</text>\n";
  return out;
}

std::string line(double x1, double y1, double x2, double y2, const std::string& stroke,
                 double width, const std::string& extra = {}) {
  std::string out = "<line x1=\"" + fx(x1) + "\" y1=\"" + fx(y1) + "\" x2=\"" + fx(x2) +
                    "\" y2=\"" + fx(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
                    fx(width) + "\"";
  if (!extra.empty()) out += " " + extra;
  out += "/>\n";
  return out;
}

std::string circle(double cx, double cy, double r, const std::string& fill, double opacity) {
  return "<circle cx=\"" + fx(cx) + "\" cy=\"" + fx(cy) + "\" r=\"" + fx(r) + "\" fill=\"" +
         fill + "\" fill-opacity=\"" + fx(opacity) + "\"/>\n";
}

// Linear blend between the low and high endpoint colors, t clamped to [0,1].
std::string value_color(double t) {
  if (!(t >= 0.0)) t = 0.0;
  if (t > 1.0) t = 1.0;
  const int lo[3] = {0x1a, 0x98, 0x50};
  const int hi[3] = {0xd7, 0x30, 0x27};
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(std::lround(lo[0] + (hi[0] - lo[0]) * t)),
                static_cast<int>(std::lround(lo[1] + (hi[1] - lo[1]) * t)),
                static_cast<int>(std::lround(lo[2] + (hi[2] - lo[2]) * t)));
  return buf;
}

std::string gradient_def(const std::string& id) {
  std::string out = "<defs><linearGradient id=\"" + id + "\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">";
  out += "<stop offset=\"0\" stop-color=\"" + std::string(kLowColor) + "\"/>";
  out += "<stop offset=\"1\" stop-color=\"" + std::string(kHighColor) + "\"/>";
  out += "</linearGradient></defs>\n";
  return out;
}

// Color bar with high/low end labels and a rotated caption along the bar.
std::string color_bar(double x, double top, double height, const std::string& caption) {
  std::string out = gradient_def("vg");
  out += "<rect x=\"" + fx(x) + "\" y=\"" + fx(top) + "\" width=\"12\" height=\"" + fx(height) +
         "\" fill=\"url(#vg)\" stroke=\"#333333\" stroke-width=\"0.5\"/>\n";
  out += text(x + 6, top - 7, "high", 10, "#333333", "middle");
  out += text(x + 6, top + height + 13, "low", 10, "#333333", "middle");
  double cx = x + 26;
  double cy = top + height / 2;
  out += text(cx, cy, caption, 10, "#333333", "middle",
              "transform=\"rotate(-90 " + fx(cx) + " " + fx(cy) + ")\"");
  return out;
}

struct Span {
  double lo = 0.0;
  double hi = 1.0;
  double at(double t) const { return lo + (hi - lo) * t; }
  double unit(double v) const { return (v - lo) / (hi - lo); }
};

Span padded_span(double lo, double hi, double frac) {
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  double pad = (hi - lo) * frac;
  return {lo - pad, hi + pad};
}

}  // namespace

std::string roc_svg(const std::vector<RocSeries>& series, const std::string& title,
                    const std::string& comment) {
  if (series.empty()) throw std::invalid_argument("no curves to draw");
  for (const auto& s : series) {
    if (s.curve.points.size() < 2)
      throw std::invalid_argument("curve '" + s.name + "' has fewer than two points");
  }

  const double kW = 520, kH = 520, kL = 64, kR = 16, kT = 44, kB = 56;
  auto px = [&](double fpr) { return kL + fpr * (kW - kL - kR); };
  auto py = [&](double tpr) { return kH - kB - tpr * (kH - kT - kB); };

  std::string out = svg_open(kW, kH);
  out += comment_block(comment);
  if (!title.empty()) out += text(kW / 2, 24, title, 14, "#111111", "middle", "font-weight=\"600\"");

  for (int g = 0; g <= 5; ++g) {
    double v = g / 5.0;
    if (g > 0 && g < 5) {
      out += line(px(v), py(0), px(v), py(1), "#dddddd", 0.75);
      out += line(px(0), py(v), px(1), py(v), "#dddddd", 0.75);
    }
    out += text(px(v), kH - kB + 16, format_fixed(v, 1), 11, "#333333", "middle");
    out += text(kL - 8, py(v) + 4, format_fixed(v, 1), 11, "#333333", "end");
  }
  out += line(px(0), py(0), px(1), py(1), "#999999", 1.0, "stroke-dasharray=\"5 4\"");
  out += "<rect x=\"" + fx(kL) + "\" y=\"" + fx(kT) + "\" width=\"" + fx(kW - kL - kR) +
         "\" height=\"" + fx(kH - kT - kB) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out += text((kL + kW - kR) / 2, kH - 14, "False positive rate", 12, "#111111", "middle");
  out += text(18, (kT + kH - kB) / 2, "True positive rate", 12, "#111111", "middle",
              "transform=\"rotate(-90 18 " + fx((kT + kH - kB) / 2) + ")\"");

  for (size_t i = 0; i < series.size(); ++i) {
    std::string pts;
    for (const auto& p : series[i].curve.points) {
      if (!pts.empty()) pts += " ";
      pts += fx(px(p.fpr)) + "," + fx(py(p.tpr));
    }
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
           std::string(kPalette[i % kPaletteSize]) +
           "\" stroke-width=\"1.8\" stroke-linejoin=\"round\"/>\n";
  }

  double ly = kH - kB - 14 - 18.0 * (series.size() - 1);
  for (size_t i = 0; i < series.size(); ++i) {
    double y = ly + 18.0 * i;
    out += line(kW - kR - 244, y - 4, kW - kR - 218, y - 4, kPalette[i % kPaletteSize], 2.5);
    out += text(kW - kR - 210, y, series[i].name + ": AUC=" + fx(series[i].curve.auc), 11,
                "#111111");
  }

  out += "</svg>\n";
  return out;
}

std::string summary_svg(const std::vector<SummaryFeature>& features, const std::string& title,
                        const std::string& comment) {
  if (features.empty()) throw std::invalid_argument("no features to draw");

  const double kRowH = 26, kW = 660, kT = 46, kL = 168, kPR = 560;
  const double plot_h = kRowH * features.size();
  const double kH = kT + plot_h + 58;

  double m = 1e-12;
  for (const auto& f : features)
    for (const auto& p : f.points) m = std::max(m, std::fabs(p.phi));
  auto px = [&](double phi) { return kL + (phi + m) / (2 * m) * (kPR - kL); };

  std::string out = svg_open(kW, kH);
  out += comment_block(comment);
  if (!title.empty()) out += text(kW / 2, 24, title, 14, "#111111", "middle", "font-weight=\"600\"");

  for (int g = -2; g <= 2; ++g) {
    double v = m * g / 2.0;
    out += line(px(v), kT, px(v), kT + plot_h, g == 0 ? "#888888" : "#eeeeee", g == 0 ? 1.0 : 0.75);
    out += text(px(v), kT + plot_h + 18, fx(v), 10, "#333333", "middle");
  }
  out += text((kL + kPR) / 2, kH - 12, "contribution to the margin", 12, "#111111", "middle");

  for (size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    double cy0 = kT + i * kRowH + kRowH / 2;
    out += text(kL - 10, cy0 + 4, f.name, 11, "#111111", "end");

    // Deterministic beeswarm: points stack above and below the row line in
    // their input order, binned along the axis.
    const int kBins = 48;
    std::vector<int> counts(kBins, 0);
    for (const auto& p : f.points) {
      int bin = static_cast<int>((p.phi + m) / (2 * m) * kBins);
      bin = std::clamp(bin, 0, kBins - 1);
      int k = counts[bin]++;
      double off = std::min(3.4 * ((k + 1) / 2), 10.2);
      double cy = cy0 + (k % 2 == 1 ? off : -off);
      out += circle(px(p.phi), cy, 2.4, value_color(p.color), 0.85);
    }
  }

  out += color_bar(586, kT, plot_h, "marker value");
  out += "</svg>\n";
  return out;
}

std::string dependence_svg(const DependenceData& data, const std::string& title,
                           const std::string& comment) {
  if (data.points.empty()) throw std::invalid_argument("no points to draw");

  const double kW = 560, kH = 440, kL = 74, kR = 118, kT = 44, kB = 58;
  double xlo = data.points[0].x, xhi = xlo, ylo = data.points[0].phi, yhi = ylo;
  double clo = data.points[0].color, chi = clo;
  for (const auto& p : data.points) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    ylo = std::min(ylo, p.phi);
    yhi = std::max(yhi, p.phi);
    clo = std::min(clo, p.color);
    chi = std::max(chi, p.color);
  }
  Span xs = padded_span(xlo, xhi, 0.04);
  Span ys = padded_span(ylo, yhi, 0.04);
  auto px = [&](double v) { return kL + xs.unit(v) * (kW - kL - kR); };
  auto py = [&](double v) { return kH - kB - ys.unit(v) * (kH - kT - kB); };

  std::string out = svg_open(kW, kH);
  out += comment_block(comment);
  if (!title.empty()) out += text(kW / 2, 24, title, 14, "#111111", "middle", "font-weight=\"600\"");

  for (int g = 0; g <= 4; ++g) {
    double tx = xs.at(g / 4.0), ty = ys.at(g / 4.0);
    if (g > 0 && g < 4) {
      out += line(px(tx), kT, px(tx), kH - kB, "#eeeeee", 0.75);
      out += line(kL, py(ty), kW - kR, py(ty), "#eeeeee", 0.75);
    }
    out += text(px(tx), kH - kB + 16, fx(tx), 10, "#333333", "middle");
    out += text(kL - 8, py(ty) + 4, fx(ty), 10, "#333333", "end");
  }
  out += "<rect x=\"" + fx(kL) + "\" y=\"" + fx(kT) + "\" width=\"" + fx(kW - kL - kR) +
         "\" height=\"" + fx(kH - kT - kB) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out += text((kL + kW - kR) / 2, kH - 14, data.feature, 12, "#111111", "middle");
  out += text(18, (kT + kH - kB) / 2, "contribution to the margin", 12, "#111111", "middle",
              "transform=\"rotate(-90 18 " + fx((kT + kH - kB) / 2) + ")\"");

  for (const auto& p : data.points) {
    double t = chi > clo ? (p.color - clo) / (chi - clo) : 0.5;
    out += circle(px(p.x), py(p.phi), 2.6, value_color(t), 0.9);
  }

  out += color_bar(kW - kR + 30, kT, kH - kT - kB, data.color_feature);
  out += text(kW - 8, kH - 10, data.method, 9, "#666666", "end");
  out += "</svg>\n";
  return out;
}

std::string force_svg(const Explanation& explanation, const std::string& title,
                      const std::string& comment) {
  const double kW = 680, kH = 188, kML = 24, kMR = 24, kLine = 96;

  struct Segment {
    std::string label;
    double from = 0.0;
    double to = 0.0;
    bool positive = false;
  };
  std::vector<Segment> chain;
  double c = explanation.base_value;
  for (const auto& item : explanation.items) {
    if (item.phi <= 0.0) continue;
    chain.push_back({item.name + "=" + format_shortest(item.value), c, c + item.phi, true});
    c = chain.back().to;
  }
  for (const auto& item : explanation.items) {
    if (item.phi >= 0.0) continue;
    chain.push_back({item.name + "=" + format_shortest(item.value), c, c + item.phi, false});
    c = chain.back().to;
  }

  double lo = std::min(explanation.base_value, explanation.output_value);
  double hi = std::max(explanation.base_value, explanation.output_value);
  for (const auto& seg : chain) {
    lo = std::min({lo, seg.from, seg.to});
    hi = std::max({hi, seg.from, seg.to});
  }
  Span span = padded_span(lo, hi, 0.06);
  auto px = [&](double v) { return kML + span.unit(v) * (kW - kML - kMR); };

  std::string out = svg_open(kW, kH);
  out += comment_block(comment);
  if (!title.empty()) out += text(kW / 2, 18, title, 14, "#111111", "middle", "font-weight=\"600\"");

  out += line(kML, kLine, kW - kMR, kLine, "#999999", 1.0);

  for (size_t i = 0; i < chain.size(); ++i) {
    const auto& seg = chain[i];
    const char* fill = seg.positive ? kPushUpColor : kPushDownColor;
    double x1 = std::min(px(seg.from), px(seg.to));
    double x2 = std::max(px(seg.from), px(seg.to));
    double head = std::min(6.0, x2 - x1);
    double body = x2 - x1 - head;
    if (seg.positive) {
      if (body > 0)
        out += "<rect x=\"" + fx(x1) + "\" y=\"87\" width=\"" + fx(body) +
               "\" height=\"18\" fill=\"" + fill + "\" stroke=\"#ffffff\"/>\n";
      out += "<polygon points=\"" + fx(x2 - head) + ",87 " + fx(x2) + ",96 " + fx(x2 - head) +
             ",105\" fill=\"" + fill + "\"/>\n";
    } else {
      if (body > 0)
        out += "<rect x=\"" + fx(x1 + head) + "\" y=\"87\" width=\"" + fx(body) +
               "\" height=\"18\" fill=\"" + fill + "\" stroke=\"#ffffff\"/>\n";
      out += "<polygon points=\"" + fx(x1 + head) + ",87 " + fx(x1) + ",96 " + fx(x1 + head) +
             ",105\" fill=\"" + fill + "\"/>\n";
    }

    if (i < 8) {
      double mid = std::clamp((x1 + x2) / 2, 40.0, kW - 40.0);
      double row_y = 136 + 16.0 * (i % 3);
      out += line(mid, 106, mid, row_y - 9, "#cccccc", 0.75);
      out += text(mid, row_y, seg.label, 10, fill, "middle");
    }
  }

  double bx = px(explanation.base_value);
  double ox = px(explanation.output_value);
  out += line(bx, 64, bx, 116, "#333333", 1.0);
  out += text(std::clamp(bx, 90.0, kW - 110.0), 60,
              "base value=" + format_fixed(explanation.base_value, 2), 11, "#333333", "middle");
  out += line(ox, 78, ox, 116, "#333333", 1.6);
  out += text(std::clamp(ox, 90.0, kW - 110.0), 76,
              "output value=" + format_fixed(explanation.output_value, 2), 11, "#111111",
              "middle", "font-weight=\"600\"");

  out += "</svg>\n";
  return out;
}

}  // namespace riskbench
