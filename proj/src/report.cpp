#include "dvforge/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace dvf {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

RocCurve roc_auc(const std::vector<double>& values, const std::vector<std::uint8_t>& noise_mask) {
  if (values.size() != noise_mask.size()) {
    throw std::invalid_argument("roc_auc: values and mask lengths differ");
  }
  std::size_t pos = 0, neg = 0;
  for (auto m : noise_mask) (m ? neg : pos)++;
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("roc_auc: mask must contain both clean and noisy records");
  }

  // sort by score descending, group ties
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b];
  });

  RocCurve curve;
  curve.tpr.push_back(0.0);
  curve.fpr.push_back(0.0);
  double tp = 0, fp = 0, auc = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double score = values[order[i]];
    double dtp = 0, dfp = 0;
    while (i < order.size() && values[order[i]] == score) {
      (noise_mask[order[i]] ? dfp : dtp) += 1.0;
      ++i;
    }
    const double prev_fpr = fp / static_cast<double>(neg);
    const double prev_tpr = tp / static_cast<double>(pos);
    tp += dtp;
    fp += dfp;
    const double cur_fpr = fp / static_cast<double>(neg);
    const double cur_tpr = tp / static_cast<double>(pos);
    auc += (cur_fpr - prev_fpr) * 0.5 * (cur_tpr + prev_tpr);  // trapezoid = half-credit ties
    curve.thresholds.push_back(score);
    curve.tpr.push_back(cur_tpr);
    curve.fpr.push_back(cur_fpr);
  }
  curve.auc = auc;
  return curve;
}

std::vector<SummaryCell> aggregate_runs(const std::vector<RunRecord>& records) {
  if (records.empty()) return {};
  std::map<std::pair<std::string, double>, std::vector<double>> cells;
  for (const auto& r : records) {
    cells[{r.method, r.noise_rate}].push_back(r.test_accuracy);
  }
  std::vector<SummaryCell> out;
  for (const auto& [key, scores] : cells) {
    SummaryCell c;
    c.method = key.first;
    c.noise_rate = key.second;
    c.count = static_cast<int>(scores.size());
    double sum = 0.0;
    for (double s : scores) sum += s;
    c.mean = sum / static_cast<double>(scores.size());
    if (scores.size() > 1) {
      double ss = 0.0;
      for (double s : scores) ss += (s - c.mean) * (s - c.mean);
      c.stddev = std::sqrt(ss / static_cast<double>(scores.size() - 1));
    }
    out.push_back(std::move(c));
  }
  return out;  // std::map iteration is already (method, noise) sorted
}

void write_scores_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "method,noise_rate,seed,test_accuracy,wall_clock_s,inner_fit_count\n";
  for (const auto& r : records) {
    os << r.method << ',' << num(r.noise_rate) << ',' << r.run_seed << ','
       << num(r.test_accuracy) << ',' << num(r.wall_clock_s) << ',' << r.inner_fit_count
       << '\n';
  }
}

void write_values_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "method,noise_rate,seed,record_id,value,is_noisy\n";
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      const int id = i < r.record_ids.size() ? r.record_ids[i] : static_cast<int>(i);
      const int noisy = i < r.noisy.size() ? r.noisy[i] : 0;
      os << r.method << ',' << num(r.noise_rate) << ',' << r.run_seed << ',' << id << ','
         << num(r.values[i]) << ',' << noisy << '\n';
    }
  }
}

void write_roc_csv(std::ostream& os, const std::string& method, const RocCurve& curve) {
  os << "method,fpr,tpr\n";
  for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
    os << method << ',' << num(curve.fpr[i]) << ',' << num(curve.tpr[i]) << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryCell>& cells) {
  os << "method,noise_rate,mean,std,count\n";
  for (const auto& c : cells) {
    os << c.method << ',' << num(c.noise_rate) << ',' << num(c.mean) << ',' << num(c.stddev)
       << ',' << c.count << '\n';
  }
}

void write_summary_json(std::ostream& os, const std::vector<SummaryCell>& cells) {
  os << "[";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    os << (i ? ",\n " : "\n ") << "{\"method\":\"" << c.method << "\",\"noise_rate\":"
       << num(c.noise_rate) << ",\"mean\":" << num(c.mean) << ",\"std\":" << num(c.stddev)
       << ",\"count\":" << c.count << (c.count == 1 ? ",\"single_run\":true" : "") << "}";
  }
  os << "\n]\n";
}

void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& rows) {
  os << "method,train_size,wall_clock_s,inner_fit_count\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.train_size << ',' << num(r.wall_clock_s) << ','
       << r.inner_fit_count << '\n';
  }
}

namespace {

constexpr int kW = 480, kH = 360, kMargin = 48;

double sx(double x) { return kMargin + x * (kW - 2 * kMargin); }
double sy(double y) { return kH - kMargin - y * (kH - 2 * kMargin); }

const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return colors[i % 8];
}

}  // namespace

bool render_roc_svg(const std::string& path, const std::vector<NamedCurve>& curves) {
  if (curves.empty()) {
    std::cerr << "warning: no ROC curves to render, skipping " << path << "\n";
    return false;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\">\n";
  os << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  // diagonal reference line
  os << "<line x1=\"" << num(sx(0)) << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << num(sx(1))
     << "\" y2=\"" << num(sy(1)) << "\" class=\"diagonal\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
  os << "<line x1=\"" << num(sx(0)) << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << num(sx(1))
     << "\" y2=\"" << num(sy(0)) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << num(sx(0)) << "\" y1=\"" << num(sy(0)) << "\" x2=\"" << num(sx(0))
     << "\" y2=\"" << num(sy(1)) << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << num(sx(0.5)) << "\" y=\"" << kH - 12
     << "\" text-anchor=\"middle\" font-size=\"12\">false positive rate</text>\n";
  os << "<text x=\"14\" y=\"" << num(sy(0.5))
     << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " << num(sy(0.5))
     << ")\">true positive rate</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const RocCurve& cv = curves[c].curve;
    os << "<polyline fill=\"none\" stroke=\"" << palette(c) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < cv.fpr.size(); ++i) {
      os << (i ? " " : "") << num(sx(cv.fpr[i])) << ',' << num(sy(cv.tpr[i]));
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW - kMargin - 4 << "\" y=\"" << kMargin + 16 * (c + 1)
       << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << palette(c) << "\">"
       << curves[c].name << " (AUC " << num(cv.auc) << ")</text>\n";
  }
  os << "</svg>\n";
  return true;
}

bool render_score_bars_svg(const std::string& path, const std::vector<SummaryCell>& cells) {
  if (cells.empty()) {
    std::cerr << "warning: no summary cells to render, skipping " << path << "\n";
    return false;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  const double bar_w = static_cast<double>(kW - 2 * kMargin) / cells.size();
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\">\n";
  os << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double h = std::clamp(cells[i].mean, 0.0, 1.0);
    const double x = kMargin + bar_w * i;
    os << "<rect x=\"" << num(x + 2) << "\" y=\"" << num(sy(h)) << "\" width=\""
       << num(bar_w - 4) << "\" height=\"" << num(sy(0) - sy(h)) << "\" fill=\""
       << palette(i) << "\"/>\n";
    os << "<text x=\"" << num(x + bar_w / 2) << "\" y=\"" << kH - 12
       << "\" text-anchor=\"middle\" font-size=\"10\">" << cells[i].method << "@"
       << num(cells[i].noise_rate) << "</text>\n";
  }
  os << "</svg>\n";
  return true;
}

}  // namespace dvf
