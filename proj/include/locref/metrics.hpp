#pragma once

#include <string>
#include <vector>

#include "locref/image.hpp"

namespace locref {

// Mergeable pixel tallies; change is the positive class.
struct ConfusionCounts {
  long long tp = 0, tn = 0, fp = 0, fn = 0;

  long long total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

ConfusionCounts confusion_counts(const Mask& pred, const Mask& gt);

// Percentages. Metrics with a zero denominator report 0 and are listed in
// `degenerate`.
struct MetricValues {
  double oa = 0, pre = 0, rec = 0, f1 = 0, iou = 0;
  std::vector<std::string> degenerate;
};

MetricValues area_metrics(const ConfusionCounts& c);

// Boundary metrics: both masks reduce to their 1-pixel boundaries first.
ConfusionCounts edge_confusion_counts(const Mask& pred, const Mask& gt);
MetricValues edge_metrics(const Mask& pred, const Mask& gt);

struct MetricReport {
  MetricValues area;
  MetricValues edge;
  ConfusionCounts area_counts;
  ConfusionCounts edge_counts;
  std::string aggregation = "pooled-counts";  // counts are summed over tiles before deriving metrics
};

MetricReport build_report(const ConfusionCounts& area, const ConfusionCounts& edge);

std::string report_json(const MetricReport& r);
std::string report_csv(const MetricReport& r);
void write_report(const std::string& path_prefix, const MetricReport& r);  // writes .json and .csv

}  // namespace locref
