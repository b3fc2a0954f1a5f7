#pragma once

#include <string>
#include <vector>

#include "hkflow/flow.hpp"
#include "hkflow/verify.hpp"
#include "hkflow_cli/config.hpp"

namespace hkflow::cli {

// Column order of the time-series CSV.
inline const char* kSeriesHeader = "# t,vol,r,max_abs_R,min_eig_g,mean_phi";

std::string series_csv(const std::vector<SeriesRow>& rows);
// coords lists the first `axes` real coordinates.
json singularity_json(const SingularityReport& s, int axes = 4);
json report_json(const IdentityReport& r);
std::string report_table(const std::vector<IdentityReport>& reports);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal SVG line chart; non-finite points are skipped.
std::string svg_line_plot(const std::string& title, const std::string& xlabel, const PlotSeries& s);

void write_text(const std::string& path, const std::string& text);

}  // namespace hkflow::cli
