#include "locref/metrics.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace locref {

ConfusionCounts confusion_counts(const Mask& pred, const Mask& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("confusion_counts: shape mismatch");
  ConfusionCounts c;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const bool p = pred.v[i] != 0;
    const bool g = gt.v[i] != 0;
    if (p && g)
      ++c.tp;
    else if (!p && !g)
      ++c.tn;
    else if (p)
      ++c.fp;
    else
      ++c.fn;
  }
  return c;
}

MetricValues area_metrics(const ConfusionCounts& c) {
  MetricValues m;
  const auto ratio = [&m](long long num, long long den, const char* name) {
    if (den == 0) {
      m.degenerate.push_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  const double pre = ratio(c.tp, c.tp + c.fp, "pre");
  const double rec = ratio(c.tp, c.tp + c.fn, "rec");
  double f1 = 0.0;
  if (pre + rec > 0.0)
    f1 = 2.0 * pre * rec / (pre + rec);
  else
    m.degenerate.push_back("f1");
  const double iou = ratio(c.tp, c.tp + c.fp + c.fn, "iou");
  const double oa = ratio(c.tp + c.tn, c.total(), "oa");
  m.pre = 100.0 * pre;
  m.rec = 100.0 * rec;
  m.f1 = 100.0 * f1;
  m.iou = 100.0 * iou;
  m.oa = 100.0 * oa;
  return m;
}

ConfusionCounts edge_confusion_counts(const Mask& pred, const Mask& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("edge_confusion_counts: shape mismatch");
  return confusion_counts(boundary_extract(pred), boundary_extract(gt));
}

MetricValues edge_metrics(const Mask& pred, const Mask& gt) { return area_metrics(edge_confusion_counts(pred, gt)); }

MetricReport build_report(const ConfusionCounts& area, const ConfusionCounts& edge) {
  MetricReport r;
  r.area_counts = area;
  r.edge_counts = edge;
  r.area = area_metrics(area);
  r.edge = area_metrics(edge);
  return r;
}

namespace {

nlohmann::json values_json(const MetricValues& v) {
  return {{"oa", v.oa}, {"pre", v.pre}, {"rec", v.rec}, {"f1", v.f1}, {"iou", v.iou}, {"degenerate", v.degenerate}};
}

nlohmann::json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

}  // namespace

std::string report_json(const MetricReport& r) {
  nlohmann::json j;
  j["aggregation"] = r.aggregation;
  j["area"] = values_json(r.area);
  j["area"]["counts"] = counts_json(r.area_counts);
  j["edge"] = values_json(r.edge);
  j["edge"]["counts"] = counts_json(r.edge_counts);
  return j.dump(2);
}

std::string report_csv(const MetricReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "oa,pre,rec,f1,iou,pre_edge,rec_edge,f1_edge,iou_edge,"
        "tp,tn,fp,fn,tp_edge,tn_edge,fp_edge,fn_edge,degenerate\n";
  os << r.area.oa << ',' << r.area.pre << ',' << r.area.rec << ',' << r.area.f1 << ',' << r.area.iou << ','
     << r.edge.pre << ',' << r.edge.rec << ',' << r.edge.f1 << ',' << r.edge.iou << ',' << r.area_counts.tp << ','
     << r.area_counts.tn << ',' << r.area_counts.fp << ',' << r.area_counts.fn << ',' << r.edge_counts.tp << ','
     << r.edge_counts.tn << ',' << r.edge_counts.fp << ',' << r.edge_counts.fn << ',';
  std::string flags;
  for (const auto& d : r.area.degenerate) flags += (flags.empty() ? "" : ";") + d;
  for (const auto& d : r.edge.degenerate) flags += (flags.empty() ? "" : ";") + (d + "_edge");
  os << flags << '\n';
  return os.str();
}

void write_report(const std::string& path_prefix, const MetricReport& r) {
  {
    std::ofstream f(path_prefix + ".json");
    if (!f) throw std::runtime_error("cannot write " + path_prefix + ".json");
    f << report_json(r) << '\n';
  }
  {
    std::ofstream f(path_prefix + ".csv");
    if (!f) throw std::runtime_error("cannot write " + path_prefix + ".csv");
    f << report_csv(r);
  }
}

}  // namespace locref
