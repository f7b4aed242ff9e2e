#include "saup/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "saup/error.hpp"
#include "saup/fsio.hpp"

namespace saup::svgplot {

namespace {

constexpr double kWidth = 760, kHeight = 480;
constexpr double kLeft = 70, kRight = 30, kTop = 50, kBottom = 55;

const char* kPalette[] = {"#3566b5", "#d1452c", "#3c8f4e", "#9356b3",
                          "#c98a1f", "#2aa0a6", "#b43d74", "#6b7c23",
                          "#5a5a5a", "#8a4f2c"};
constexpr int kPaletteSize = 10;

std::string num(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
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

struct Range {
  double lo = 0.0, hi = 1.0;

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  static Range of(const std::vector<double>& values) {
    Range r{std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};
    for (double v : values) r.include(v);
    if (!(r.lo <= r.hi)) r = {0.0, 1.0};
    if (r.lo == r.hi) {
      r.lo -= 0.5;
      r.hi += 0.5;
    }
    double pad = (r.hi - r.lo) * 0.05;
    r.lo -= pad;
    r.hi += pad;
    return r;
  }
  double ratio(double v) const { return (v - lo) / (hi - lo); }
};

std::string header(const std::string& title, const std::string& meta,
                   double width = kWidth, double height = kHeight) {
  std::ostringstream ss;
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
     << height << "\">\n";
  ss << "<!-- " << escape(meta) << " -->\n";
  ss << "<rect width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  ss << "<text x=\"" << width / 2
     << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
        "text-anchor=\"middle\" font-weight=\"bold\">"
     << escape(title) << "</text>\n";
  return ss.str();
}

// Axes with ticks for a standard plot area.
void draw_axes(std::ostringstream& ss, const Range& xr, const Range& yr,
               const std::string& x_label, const std::string& y_label) {
  double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  ss << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1
     << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
  ss << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0
     << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double f = i / 5.0;
    double px = x0 + f * (x1 - x0);
    double py = y0 - f * (y0 - y1);
    ss << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px
       << "\" y2=\"" << y0 + 5 << "\" stroke=\"black\"/>\n";
    ss << "<text x=\"" << px << "\" y=\"" << y0 + 18
       << "\" font-family=\"sans-serif\" font-size=\"11\" "
          "text-anchor=\"middle\">"
       << num(xr.lo + f * (xr.hi - xr.lo)) << "</text>\n";
    ss << "<line x1=\"" << x0 - 5 << "\" y1=\"" << py << "\" x2=\"" << x0
       << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
    ss << "<text x=\"" << x0 - 8 << "\" y=\"" << py + 4
       << "\" font-family=\"sans-serif\" font-size=\"11\" "
          "text-anchor=\"end\">"
       << num(yr.lo + f * (yr.hi - yr.lo)) << "</text>\n";
  }
  ss << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12
     << "\" font-family=\"sans-serif\" font-size=\"13\" "
        "text-anchor=\"middle\">"
     << escape(x_label) << "</text>\n";
  ss << "<text x=\"16\" y=\"" << (y0 + y1) / 2
     << "\" font-family=\"sans-serif\" font-size=\"13\" "
        "text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (y0 + y1) / 2 << ")\">" << escape(y_label) << "</text>\n";
}

void draw_legend(std::ostringstream& ss, const std::vector<std::string>& names,
                 bool hollow_markers = false) {
  double lx = kWidth - kRight - 150, ly = kTop + 8;
  for (size_t i = 0; i < names.size(); ++i) {
    const char* color = kPalette[i % kPaletteSize];
    double y = ly + 18 * static_cast<double>(i);
    if (hollow_markers)
      ss << "<circle cx=\"" << lx + 6 << "\" cy=\"" << y - 4
         << "\" r=\"5\" fill=\"" << color << "\"/>\n";
    else
      ss << "<rect x=\"" << lx << "\" y=\"" << y - 9
         << "\" width=\"14\" height=\"6\" fill=\"" << color << "\"/>\n";
    ss << "<text x=\"" << lx + 20 << "\" y=\"" << y
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(names[i])
       << "</text>\n";
  }
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series,
                      const std::string& meta) {
  if (series.empty()) throw InputError("line chart needs at least one series");
  std::vector<double> all_x, all_y;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw DimensionError("series '" + s.label + "': x/y length mismatch");
    all_x.insert(all_x.end(), s.x.begin(), s.x.end());
    all_y.insert(all_y.end(), s.y.begin(), s.y.end());
  }
  Range xr = Range::of(all_x), yr = Range::of(all_y);

  std::ostringstream ss;
  ss << header(title, meta);
  draw_axes(ss, xr, yr, x_label, y_label);
  double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::vector<std::string> names;
  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    names.push_back(s.label);
    ss << "<polyline fill=\"none\" stroke=\"" << kPalette[i % kPaletteSize]
       << "\" stroke-width=\"1.5\" points=\"";
    for (size_t k = 0; k < s.x.size(); ++k) {
      double px = x0 + xr.ratio(s.x[k]) * (x1 - x0);
      double py = y0 - yr.ratio(s.y[k]) * (y0 - y1);
      ss << px << ',' << py << ' ';
    }
    ss << "\"/>\n";
  }
  if (series.size() > 1 || !series[0].label.empty()) draw_legend(ss, names);
  ss << "</svg>\n";
  atomic_write(path, ss.str());
}

void write_scatter(const std::string& path, const std::string& title,
                   const std::string& x_label, const std::string& y_label,
                   const std::vector<ScatterPoint>& points,
                   const std::vector<std::string>& group_names,
                   const std::string& meta) {
  if (points.empty()) throw InputError("scatter needs at least one point");
  std::vector<double> all_x, all_y;
  for (const auto& p : points) {
    all_x.push_back(p.x);
    all_y.push_back(p.y);
  }
  Range xr = Range::of(all_x), yr = Range::of(all_y);

  std::ostringstream ss;
  ss << header(title, meta);
  draw_axes(ss, xr, yr, x_label, y_label);
  double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  for (const auto& p : points) {
    double px = x0 + xr.ratio(p.x) * (x1 - x0);
    double py = y0 - yr.ratio(p.y) * (y0 - y1);
    const char* color = kPalette[p.group % kPaletteSize];
    double r = p.emphasis ? 8.0 : 4.0;
    if (p.hollow)
      ss << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"" << r
         << "\" fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.5\"/>\n";
    else
      ss << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"" << r
         << "\" fill=\"" << color << "\"/>\n";
  }
  draw_legend(ss, group_names, /*hollow_markers=*/true);
  ss << "</svg>\n";
  atomic_write(path, ss.str());
}

void write_scatter3d(const std::string& path, const std::string& title,
                     const std::vector<ScatterPoint>& points,
                     const std::vector<std::string>& group_names,
                     const std::string& meta) {
  if (points.empty()) throw InputError("scatter3d needs at least one point");
  std::vector<double> xs, ys, zs;
  for (const auto& p : points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
    zs.push_back(p.z);
  }
  Range xr = Range::of(xs), yr = Range::of(ys), zr = Range::of(zs);

  // Isometric projection of unit-cube coordinates.
  auto project = [&](double x, double y, double z, double& px, double& py) {
    double u = xr.ratio(x), v = yr.ratio(y), w = zr.ratio(z);
    double ix = (u - v) * 0.866;
    double iy = (u + v) * 0.5 - w;
    px = kLeft + (ix + 0.866) / 1.732 * (kWidth - kLeft - kRight);
    py = kHeight - kBottom - (iy + 1.0) / 2.0 * (kHeight - kTop - kBottom);
  };

  std::ostringstream ss;
  ss << header(title, meta);
  double ox, oy;
  project(xr.lo, yr.lo, zr.lo, ox, oy);
  const char* axis_names[3] = {"pc1", "pc2", "pc3"};
  double ends[3][3] = {{xr.hi, yr.lo, zr.lo},
                       {xr.lo, yr.hi, zr.lo},
                       {xr.lo, yr.lo, zr.hi}};
  for (int a = 0; a < 3; ++a) {
    double px, py;
    project(ends[a][0], ends[a][1], ends[a][2], px, py);
    ss << "<line x1=\"" << ox << "\" y1=\"" << oy << "\" x2=\"" << px
       << "\" y2=\"" << py << "\" stroke=\"#999\"/>\n";
    ss << "<text x=\"" << px << "\" y=\"" << py - 4
       << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#555\">"
       << axis_names[a] << "</text>\n";
  }
  for (const auto& p : points) {
    double px, py;
    project(p.x, p.y, p.z, px, py);
    const char* color = kPalette[p.group % kPaletteSize];
    double r = p.emphasis ? 8.0 : 4.0;
    if (p.hollow)
      ss << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"" << r
         << "\" fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.5\"/>\n";
    else
      ss << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"" << r
         << "\" fill=\"" << color << "\"/>\n";
  }
  draw_legend(ss, group_names, /*hollow_markers=*/true);
  ss << "</svg>\n";
  atomic_write(path, ss.str());
}

void write_heatmap(const std::string& path, const std::string& title,
                   const std::vector<std::vector<double>>& values,
                   const std::vector<std::string>& row_labels,
                   const std::vector<std::string>& col_labels,
                   const std::string& meta) {
  if (values.empty() || values[0].empty())
    throw InputError("heatmap needs a non-empty matrix");
  size_t rows = values.size(), cols = values[0].size();
  for (const auto& row : values)
    if (row.size() != cols)
      throw DimensionError("heatmap rows have unequal lengths");
  if (row_labels.size() != rows || col_labels.size() != cols)
    throw DimensionError("heatmap label counts do not match the matrix");

  double lo = values[0][0], hi = values[0][0];
  for (const auto& row : values)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (lo == hi) hi = lo + 1.0;

  double label_w = 110, label_h = 90;
  double cell = std::min(48.0, std::min((kWidth - label_w - 60) / cols,
                                        (kHeight - label_h - 80) / rows));
  double width = label_w + cell * cols + 60;
  double height = 50 + cell * rows + label_h;

  std::ostringstream ss;
  ss << header(title, meta, width, height);
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) {
      double f = (values[r][c] - lo) / (hi - lo);
      // White-to-blue ramp.
      int red = static_cast<int>(std::lround(255 - 205 * f));
      int green = static_cast<int>(std::lround(255 - 155 * f));
      int blue = 255;
      double x = label_w + c * cell, y = 40 + r * cell;
      ss << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"rgb(" << red << ',' << green
         << ',' << blue << ")\" stroke=\"#ccc\"/>\n";
      if (cols <= 16)
        ss << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
           << "\" font-family=\"sans-serif\" font-size=\"10\" "
              "text-anchor=\"middle\">"
           << num(std::round(values[r][c] * 1000) / 1000) << "</text>\n";
    }
  for (size_t r = 0; r < rows; ++r)
    ss << "<text x=\"" << label_w - 6 << "\" y=\"" << 40 + r * cell + cell / 2 + 4
       << "\" font-family=\"sans-serif\" font-size=\"11\" "
          "text-anchor=\"end\">"
       << escape(row_labels[r]) << "</text>\n";
  for (size_t c = 0; c < cols; ++c) {
    double x = label_w + c * cell + cell / 2, y = 40 + rows * cell + 12;
    ss << "<text x=\"" << x << "\" y=\"" << y
       << "\" font-family=\"sans-serif\" font-size=\"11\" "
          "text-anchor=\"start\" transform=\"rotate(45 " << x << ' ' << y
       << ")\">" << escape(col_labels[c]) << "</text>\n";
  }
  ss << "<text x=\"" << label_w << "\" y=\"" << height - 10
     << "\" font-family=\"sans-serif\" font-size=\"11\">min " << num(lo)
     << " / max " << num(hi) << "</text>\n";
  ss << "</svg>\n";
  atomic_write(path, ss.str());
}

}  // namespace saup::svgplot
