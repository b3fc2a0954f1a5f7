#include "hkflow_cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hkflow/error.hpp"

namespace hkflow::cli {

namespace {

std::string fmt(const char* f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

// JSON has no NaN; non-finite values become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string series_csv(const std::vector<SeriesRow>& rows) {
  std::string out = std::string(kSeriesHeader) + "\n";
  for (const SeriesRow& r : rows) {
    for (double v : {r.t, r.vol, r.r, r.max_abs_R, r.min_eig}) out += fmt("%.17g", v) + ",";
    out += fmt("%.17g", r.mean_phi) + "\n";
  }
  return out;
}

json singularity_json(const SingularityReport& s, int axes) {
  json coords = json::array();
  for (int a = 0; a < axes; ++a) coords.push_back(s.coords[a]);
  return {{"t_last_good", s.t_last_good},
          {"t_failed", s.t_failed},
          {"step", s.step},
          {"point", s.point},
          {"coords", coords},
          {"min_eigenvalue", num(s.min_eigenvalue)},
          {"message", s.message}};
}

json report_json(const IdentityReport& r) {
  json j;
  j["name"] = r.name;
  j["kind"] = r.kind;
  j["pass"] = r.pass;
  j["tolerance"] = r.tolerance;
  if (r.kind == "absolute") j["value"] = num(r.value);
  if (r.kind == "order") {
    j["zero_case"] = r.zero_case;
    json levels = json::array();
    for (const LevelResult& l : r.levels) {
      json per = json::array();
      for (double x : l.per_center) per.push_back(num(x));
      levels.push_back({{"stride", l.stride},
                        {"spacing", l.spacing},
                        {"max_residual", num(l.max_residual)},
                        {"l2_residual", num(l.l2_residual)},
                        {"magnitude", num(l.magnitude)},
                        {"per_center", per}});
    }
    j["levels"] = levels;
    json orders = json::array();
    for (double q : r.orders) orders.push_back(num(q));
    j["orders"] = orders;
  }
  if (!r.gauge.empty()) j["gauge"] = r.gauge;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

std::string report_table(const std::vector<IdentityReport>& reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-30s %-5s %-12s %-22s %s\n", "identity", "pass", "residual", "orders", "note");
  os << line;
  for (const IdentityReport& r : reports) {
    std::string res, ord;
    if (r.kind == "order") {
      res = r.levels.empty() ? "-" : fmt("%.3e", r.levels.back().max_residual);
      if (r.zero_case) ord = "zero";
      for (double q : r.orders) ord += (ord.empty() ? "" : " ") + fmt("%.3f", q);
    } else {
      res = fmt("%.3e", r.value);
      ord = "tol " + fmt("%.0e", r.tolerance);
    }
    std::snprintf(line, sizeof line, "%-30s %-5s %-12s %-22s %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                  res.c_str(), ord.c_str(), r.note.c_str());
    os << line;
  }
  return os.str();
}

std::string svg_line_plot(const std::string& title, const std::string& xlabel, const PlotSeries& s) {
  const double W = 640, H = 360, ml = 80, mr = 20, mt = 40, mb = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
    if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
    x0 = std::min(x0, s.x[i]);
    x1 = std::max(x1, s.x[i]);
    y0 = std::min(y0, s.y[i]);
    y1 = std::max(y1, s.y[i]);
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-300) x1 = x0 + 1.0;
  if (y1 - y0 < 1e-14 * std::max(1.0, std::abs(y0))) {
    double pad = std::max(1e-12, 1e-6 * std::abs(y0));
    y0 -= pad;
    y1 += pad;
  }
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << title << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
     << "\" stroke=\"black\"/>\n";
  auto label = [&](double x, double y, const std::string& text, const char* anchor) {
    os << "<text x=\"" << x << "\" y=\"" << y << "\" text-anchor=\"" << anchor
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << text << "</text>\n";
  };
  label(ml, H - mb + 16, fmt("%.4g", x0), "middle");
  label(W - mr, H - mb + 16, fmt("%.4g", x1), "middle");
  label(ml - 6, H - mb, fmt("%.6g", y0), "end");
  label(ml - 6, mt + 4, fmt("%.6g", y1), "end");
  label((ml + W - mr) / 2, H - 12, xlabel, "middle");
  label(ml + 4, mt - 6, s.label, "start");
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
    if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
    os << fmt("%.2f", px(s.x[i])) << "," << fmt("%.2f", py(s.y[i])) << " ";
  }
  os << "\"/>\n</svg>\n";
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigInvalid("cannot write " + path);
  out << text;
  if (!out) throw ConfigInvalid("write failed for " + path);
}

}  // namespace hkflow::cli
