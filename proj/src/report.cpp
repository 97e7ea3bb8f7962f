#include "pqmotion/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pqmotion {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string sanitize_field(const std::string& s) {
  std::string out = s;
  std::replace(out.begin(), out.end(), ',', ';');
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

}  // namespace

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "metric,part,value,n,notes\n";
  for (const MetricRow& r : rows)
    os << sanitize_field(r.metric) << ',' << sanitize_field(r.part) << ','
       << fmt_double(r.value) << ',' << r.n << ',' << sanitize_field(r.notes)
       << '\n';
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(is, line) || line != "metric,part,value,n,notes")
    throw std::runtime_error("bad metrics CSV header in " + path);
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    MetricRow r;
    std::string value_str, n_str;
    if (!std::getline(ss, r.metric, ',') || !std::getline(ss, r.part, ',') ||
        !std::getline(ss, value_str, ',') || !std::getline(ss, n_str, ','))
      throw std::runtime_error("bad metrics CSV row: " + line);
    std::getline(ss, r.notes);
    r.value = std::stod(value_str);
    r.n = std::stol(n_str);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_svg_chart(const std::string& path, const ChartSpec& chart) {
  const double width = 640, height = 400;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const Series& s : chart.series) {
    for (auto [x, y] : s.points) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  static const char* kColors[] = {"#4171b9", "#d1495b", "#66a182",
                                  "#edae49", "#775b9e", "#2e4057"};

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
     << "font-size=\"15\" font-family=\"sans-serif\">" << chart.title
     << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
     << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
     << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-size=\"12\" "
     << "font-family=\"sans-serif\">" << chart.xlabel << "</text>\n";
  os << "<text x=\"18\" y=\"" << mt + ph / 2
     << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\""
     << " transform=\"rotate(-90 18 " << mt + ph / 2 << ")\">" << chart.ylabel
     << "</text>\n";

  // axis extremes as tick labels
  os << "<text x=\"" << ml << "\" y=\"" << mt + ph + 16
     << "\" font-size=\"10\" font-family=\"sans-serif\">" << fmt_double(xmin)
     << "</text>\n";
  os << "<text x=\"" << ml + pw << "\" y=\"" << mt + ph + 16
     << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">"
     << fmt_double(xmax) << "</text>\n";
  os << "<text x=\"" << ml - 6 << "\" y=\"" << mt + ph
     << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">"
     << fmt_double(ymin) << "</text>\n";
  os << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 10
     << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">"
     << fmt_double(ymax) << "</text>\n";

  for (size_t si = 0; si < chart.series.size(); ++si) {
    const Series& s = chart.series[si];
    const char* color = kColors[si % 6];
    if (s.points.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.5\" points=\"";
      for (auto [x, y] : s.points) os << px(x) << ',' << py(y) << ' ';
      os << "\"/>\n";
    }
    for (auto [x, y] : s.points)
      os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
         << "\" r=\"3\" fill=\"" << color << "\" data-series=\"" << s.name
         << "\" data-x=\"" << fmt_double(x) << "\" data-y=\"" << fmt_double(y)
         << "\"/>\n";
    os << "<text x=\"" << ml + pw - 4 << "\" y=\"" << mt + 14 + 14 * si
       << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color
       << "\" font-family=\"sans-serif\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace pqmotion
