#ifndef SAUP_SVGPLOT_HPP
#define SAUP_SVGPLOT_HPP

#include <string>
#include <vector>

namespace saup::svgplot {

// Every writer embeds `meta` (e.g. the run's config hash) as an XML comment
// so plots are traceable to the exact run that produced them.

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series,
                      const std::string& meta);

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;  // used by the 3D writer only
  int group = 0;
  bool hollow = false;    // open marker (e.g. clean vs perturbed)
  bool emphasis = false;  // large marker (e.g. the anchor)
};

void write_scatter(const std::string& path, const std::string& title,
                   const std::string& x_label, const std::string& y_label,
                   const std::vector<ScatterPoint>& points,
                   const std::vector<std::string>& group_names,
                   const std::string& meta);

// Isometric projection of 3D points onto the page; axes drawn as a tripod.
void write_scatter3d(const std::string& path, const std::string& title,
                     const std::vector<ScatterPoint>& points,
                     const std::vector<std::string>& group_names,
                     const std::string& meta);

void write_heatmap(const std::string& path, const std::string& title,
                   const std::vector<std::vector<double>>& values,
                   const std::vector<std::string>& row_labels,
                   const std::vector<std::string>& col_labels,
                   const std::string& meta);

}  // namespace saup::svgplot

#endif  // SAUP_SVGPLOT_HPP
