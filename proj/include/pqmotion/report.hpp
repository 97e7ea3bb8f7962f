#pragma once

#include <string>
#include <vector>

namespace pqmotion {

// One row of the metric report CSV: `metric,part,value,n,notes`.
struct MetricRow {
  std::string metric;
  std::string part;
  double value = 0.0;
  long n = 0;
  std::string notes;
};

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(const std::string& path);

// Static SVG line charts. Every data point is emitted as a <circle> with
// data-x / data-y attributes so reports can be scraped by tests and scripts.
struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct ChartSpec {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
};

void write_svg_chart(const std::string& path, const ChartSpec& chart);

}  // namespace pqmotion
