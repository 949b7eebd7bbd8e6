// Copyright 2026 The nerfstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "nerfstream/common.hpp"

namespace nerfstream {

// Rate-distortion bookkeeping: bits-per-pixel rates, 8-bit PSNR, curve
// assembly and comparison, CSV and SVG export.

// ---------------------------------------------------------------------------
// Rate and distortion
// ---------------------------------------------------------------------------

// Bits per pixel over the full set of rendered images.
inline double rate_bpp(uint64_t bits, size_t image_count, size_t width,
                       size_t height) {
  if (image_count == 0 || width == 0 || height == 0)
    throw ConfigError("rate_bpp needs a positive pixel count");
  return double(bits) /
         (double(image_count) * double(width) * double(height));
}

// Infinity marks a zero-MSE comparison; curve averaging skips it.
constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// PSNR of the 8-bit-quantized image pair against a 255 peak.
inline double psnr(const Image& image, const Image& reference) {
  if (image.width != reference.width || image.height != reference.height)
    throw UsageError("psnr needs images of equal dimensions");
  if (image.width == 0 || image.height == 0)
    throw UsageError("psnr needs non-empty images");
  double sse = 0;
  for (int y = 0; y < image.height; y++)
    for (int x = 0; x < image.width; x++)
      for (int c = 0; c < 3; c++) {
        double d = double(to_byte(image.at(x, y, c))) -
                   double(to_byte(reference.at(x, y, c)));
        sse += d * d;
      }
  if (sse == 0) return kInfinitePsnr;
  double mse = sse / (double(image.width) * image.height * 3.0);
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// Mean over the finite entries; the infinite sentinel when none are finite.
inline double mean_finite_psnr(const std::vector<double>& values) {
  double sum = 0;
  size_t n = 0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      n++;
    }
  return n == 0 ? kInfinitePsnr : sum / double(n);
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

struct RDPoint {
  std::string strategy;
  int qp = 0;
  uint64_t bits = 0;
  double rate_bpp = 0;
  double psnr_db = 0;
};

struct RDCurve {
  std::string strategy;
  double anchor_psnr_db = 0;
  std::vector<RDPoint> points;  // strictly ascending in rate
};

// One strategy run reduced to what curve assembly needs.
struct RunSummary {
  std::string strategy;
  int qp = 0;
  uint64_t bits = 0;
  size_t image_count = 0;
  size_t width = 0, height = 0;
  std::vector<double> view_psnr_db;
};

inline RDCurve build_curve(const std::vector<RunSummary>& results,
                           const RunSummary& anchor) {
  if (results.size() < 2)
    throw ConfigError("a curve needs at least two rate points");
  RDCurve curve;
  curve.strategy = results[0].strategy;
  curve.anchor_psnr_db = mean_finite_psnr(anchor.view_psnr_db);
  for (const RunSummary& r : results) {
    if (r.strategy != curve.strategy)
      throw ConfigError("curve mixes strategies: " + curve.strategy +
                        " and " + r.strategy);
    RDPoint p;
    p.strategy = r.strategy;
    p.qp = r.qp;
    p.bits = r.bits;
    p.rate_bpp = rate_bpp(r.bits, r.image_count, r.width, r.height);
    p.psnr_db = mean_finite_psnr(r.view_psnr_db);
    curve.points.push_back(p);
  }
  std::sort(curve.points.begin(), curve.points.end(),
            [](const RDPoint& a, const RDPoint& b) {
              return a.rate_bpp < b.rate_bpp;
            });
  std::vector<RDPoint> dedup;
  for (const RDPoint& p : curve.points) {
    if (!dedup.empty() && dedup.back().rate_bpp == p.rate_bpp) {
      std::cerr << "duplicate rate " << p.rate_bpp << " bpp in strategy "
                << curve.strategy << "; keeping the higher-quality point\n";
      if (p.psnr_db > dedup.back().psnr_db) dedup.back() = p;
      continue;
    }
    dedup.push_back(p);
  }
  curve.points = std::move(dedup);
  return curve;
}

// ---------------------------------------------------------------------------
// Curve comparison
// ---------------------------------------------------------------------------

// Mean vertical gap, in dB, between two curves over their shared rate
// interval, with the per-curve quality modeled as a cubic polynomial in
// log10(rate). Positive mean gap: the first curve sits above the second.
struct CurveComparison {
  bool comparable = false;
  double mean_gap_db = 0;
  double min_gap_db = 0;
  double max_gap_db = 0;
};

namespace detail {

inline Eigen::VectorXd fit_poly_log_rate(const RDCurve& c, int degree) {
  Eigen::MatrixXd a(long(c.points.size()), degree + 1);
  Eigen::VectorXd y(long(c.points.size()));
  for (size_t i = 0; i < c.points.size(); i++) {
    if (c.points[i].rate_bpp <= 0)
      throw ConfigError("curve comparison needs positive rates");
    double x = std::log10(c.points[i].rate_bpp);
    double pw = 1;
    for (int j = 0; j <= degree; j++) {
      a(long(i), j) = pw;
      pw *= x;
    }
    y(long(i)) = c.points[i].psnr_db;
  }
  return a.colPivHouseholderQr().solve(y);
}

inline double eval_poly(const Eigen::VectorXd& coef, double x) {
  double s = 0, pw = 1;
  for (long j = 0; j < coef.size(); j++) {
    s += coef(j) * pw;
    pw *= x;
  }
  return s;
}

inline double integrate_poly(const Eigen::VectorXd& coef, double lo,
                             double hi) {
  double s = 0;
  for (long j = 0; j < coef.size(); j++)
    s += coef(j) * (std::pow(hi, j + 1) - std::pow(lo, j + 1)) / double(j + 1);
  return s;
}

}  // namespace detail

inline CurveComparison compare_curves(const RDCurve& a, const RDCurve& b) {
  if (a.points.size() < 2 || b.points.size() < 2)
    throw ConfigError("curve comparison needs at least two points per curve");
  double lo = std::max(std::log10(a.points.front().rate_bpp),
                       std::log10(b.points.front().rate_bpp));
  double hi = std::min(std::log10(a.points.back().rate_bpp),
                       std::log10(b.points.back().rate_bpp));
  CurveComparison cmp;
  if (!(lo < hi)) return cmp;
  int deg_a = int(std::min<size_t>(3, a.points.size() - 1));
  int deg_b = int(std::min<size_t>(3, b.points.size() - 1));
  Eigen::VectorXd pa = detail::fit_poly_log_rate(a, deg_a);
  Eigen::VectorXd pb = detail::fit_poly_log_rate(b, deg_b);
  cmp.comparable = true;
  cmp.mean_gap_db = (detail::integrate_poly(pa, lo, hi) -
                     detail::integrate_poly(pb, lo, hi)) /
                    (hi - lo);
  const int kSamples = 129;
  cmp.min_gap_db = std::numeric_limits<double>::infinity();
  cmp.max_gap_db = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kSamples; i++) {
    double x = lo + (hi - lo) * double(i) / (kSamples - 1);
    double gap = detail::eval_poly(pa, x) - detail::eval_poly(pb, x);
    cmp.min_gap_db = std::min(cmp.min_gap_db, gap);
    cmp.max_gap_db = std::max(cmp.max_gap_db, gap);
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// Rank correlation
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<size_t> order(v.size());
  for (size_t i = 0; i < v.size(); i++) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) j++;
    double avg = (double(i) + double(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; k++) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Spearman rank correlation with average ranks on ties.
inline double spearman(const std::vector<double>& x,
                       const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("spearman needs two equal-length samples of >= 2");
  std::vector<double> rx = detail::average_ranks(x);
  std::vector<double> ry = detail::average_ranks(y);
  double mx = 0, my = 0;
  for (size_t i = 0; i < rx.size(); i++) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= double(rx.size());
  my /= double(ry.size());
  double cov = 0, vx = 0, vy = 0;
  for (size_t i = 0; i < rx.size(); i++) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx == 0 || vy == 0)
    throw ConfigError("spearman is undefined for a constant sample");
  return cov / std::sqrt(vx * vy);
}

// ---------------------------------------------------------------------------
// CSV export and import
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline const char* kCsvHeader = "strategy,qp,bits,rate_bpp,psnr_db,anchor_psnr_db";

inline std::string render_csv(const std::vector<RDCurve>& curves) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const RDCurve& c : curves)
    for (const RDPoint& p : c.points) {
      out += p.strategy + "," + std::to_string(p.qp) + "," +
             std::to_string(p.bits) + "," + detail::format_double(p.rate_bpp) +
             "," + detail::format_double(p.psnr_db) + "," +
             detail::format_double(c.anchor_psnr_db) + "\n";
    }
  return out;
}

inline void export_csv(const std::vector<RDCurve>& curves,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot open for writing: " + path);
  f << render_csv(curves);
  if (!f) throw UsageError("failed writing " + path);
}

inline std::vector<RDCurve> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw DecodeError("unexpected metrics CSV header", 0);
  std::vector<RDCurve> curves;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 6)
      throw DecodeError("metrics CSV line " + std::to_string(line_no) +
                            " does not have 6 fields",
                        0);
    RDPoint p;
    p.strategy = fields[0];
    p.qp = std::stoi(fields[1]);
    p.bits = std::stoull(fields[2]);
    p.rate_bpp = std::strtod(fields[3].c_str(), nullptr);
    p.psnr_db = std::strtod(fields[4].c_str(), nullptr);
    double anchor = std::strtod(fields[5].c_str(), nullptr);
    if (curves.empty() || curves.back().strategy != p.strategy) {
      RDCurve c;
      c.strategy = p.strategy;
      c.anchor_psnr_db = anchor;
      curves.push_back(c);
    }
    curves.back().points.push_back(p);
  }
  return curves;
}

inline std::vector<RDCurve> import_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_csv(buf.str());
}

// ---------------------------------------------------------------------------
// SVG plot
// ---------------------------------------------------------------------------

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

// Rate on a log x axis, PSNR on y, one polyline per strategy, a dashed
// horizontal line per anchor quality.
inline std::string render_plot_svg(const std::vector<RDCurve>& curves) {
  const double kW = 640, kH = 420;
  const double kLeft = 70, kRight = 610, kTop = 24, kBottom = 370;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const RDCurve& c : curves) {
    for (const RDPoint& p : c.points) {
      if (p.rate_bpp <= 0 || !std::isfinite(p.psnr_db)) continue;
      xmin = std::min(xmin, std::log10(p.rate_bpp));
      xmax = std::max(xmax, std::log10(p.rate_bpp));
      ymin = std::min(ymin, p.psnr_db);
      ymax = std::max(ymax, p.psnr_db);
    }
    if (std::isfinite(c.anchor_psnr_db)) {
      ymin = std::min(ymin, c.anchor_psnr_db);
      ymax = std::max(ymax, c.anchor_psnr_db);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = -2;
    xmax = 0;
    ymin = 0;
    ymax = 1;
  }
  if (xmax - xmin < 1e-9) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  double ypad = std::max(0.5, (ymax - ymin) * 0.08);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double logr) {
    return kLeft + (logr - xmin) / (xmax - xmin) * (kRight - kLeft);
  };
  auto py = [&](double v) {
    return kBottom - (v - ymin) / (ymax - ymin) * (kBottom - kTop);
  };

  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e"};
  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
       "height=\"420\" viewBox=\"0 0 640 420\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n";
  s += "<line x1=\"" + detail::svg_num(kLeft) + "\" y1=\"" +
       detail::svg_num(kBottom) + "\" x2=\"" + detail::svg_num(kRight) +
       "\" y2=\"" + detail::svg_num(kBottom) +
       "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  s += "<line x1=\"" + detail::svg_num(kLeft) + "\" y1=\"" +
       detail::svg_num(kTop) + "\" x2=\"" + detail::svg_num(kLeft) +
       "\" y2=\"" + detail::svg_num(kBottom) +
       "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (int i = 0; i <= 4; i++) {
    double logr = xmin + (xmax - xmin) * i / 4.0;
    double v = ymin + (ymax - ymin) * i / 4.0;
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", std::pow(10.0, logr));
    s += "<text x=\"" + detail::svg_num(px(logr)) + "\" y=\"" +
         detail::svg_num(kBottom + 18) +
         "\" font-size=\"11\" text-anchor=\"middle\">" + label + "</text>\n";
    std::snprintf(label, sizeof label, "%.1f", v);
    s += "<text x=\"" + detail::svg_num(kLeft - 8) + "\" y=\"" +
         detail::svg_num(py(v) + 4) +
         "\" font-size=\"11\" text-anchor=\"end\">" + label + "</text>\n";
  }
  s += "<text x=\"" + detail::svg_num((kLeft + kRight) / 2) + "\" y=\"" +
       detail::svg_num(kBottom + 38) +
       "\" font-size=\"13\" text-anchor=\"middle\">rate (bpp, log "
       "scale)</text>\n";
  s += "<text x=\"16\" y=\"" + detail::svg_num((kTop + kBottom) / 2) +
       "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       + detail::svg_num((kTop + kBottom) / 2) + ")\">PSNR (dB)</text>\n";

  size_t color = 0;
  double legend_y = kTop + 12;
  for (const RDCurve& c : curves) {
    const char* col = palette[color % 5];
    color++;
    std::string pts;
    for (const RDPoint& p : c.points) {
      if (p.rate_bpp <= 0 || !std::isfinite(p.psnr_db)) continue;
      pts += detail::svg_num(px(std::log10(p.rate_bpp))) + "," +
             detail::svg_num(py(p.psnr_db)) + " ";
    }
    if (!pts.empty()) {
      s += std::string("<polyline fill=\"none\" stroke=\"") + col +
           "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
      for (const RDPoint& p : c.points) {
        if (p.rate_bpp <= 0 || !std::isfinite(p.psnr_db)) continue;
        s += "<circle cx=\"" + detail::svg_num(px(std::log10(p.rate_bpp))) +
             "\" cy=\"" + detail::svg_num(py(p.psnr_db)) +
             "\" r=\"3\" fill=\"" + col + "\"/>\n";
      }
    }
    if (std::isfinite(c.anchor_psnr_db)) {
      s += std::string("<line x1=\"") + detail::svg_num(kLeft) + "\" y1=\"" +
           detail::svg_num(py(c.anchor_psnr_db)) + "\" x2=\"" +
           detail::svg_num(kRight) + "\" y2=\"" +
           detail::svg_num(py(c.anchor_psnr_db)) + "\" stroke=\"" + col +
           "\" stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n";
    }
    s += std::string("<text x=\"") + detail::svg_num(kRight - 4) + "\" y=\"" +
         detail::svg_num(legend_y) + "\" font-size=\"12\" fill=\"" + col +
         "\" text-anchor=\"end\">" + detail::xml_escape(c.strategy) +
         "</text>\n";
    legend_y += 16;
  }
  s += "</svg>\n";
  return s;
}

inline void export_plot(const std::vector<RDCurve>& curves,
                        const std::string& path) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot open for writing: " + path);
  f << render_plot_svg(curves);
  if (!f) throw UsageError("failed writing " + path);
}

}  // namespace nerfstream
