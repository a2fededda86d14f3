#include "fim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace fim {

RankMeScore rankme(const Matrix& z) {
  bool any_nonzero = false;
  for (double x : z.values()) {
    if (x != 0.0) {
      any_nonzero = true;
      break;
    }
  }
  if (!any_nonzero) {
    throw DegenerateInputError("RankMe is undefined for an all-zero matrix");
  }

  const std::vector<double> sigma = svd(z).sigma;
  double total = 0.0;
  for (double s : sigma) total += s;
  if (total <= 0.0) {
    throw DegenerateInputError("RankMe is undefined: zero singular mass");
  }

  double entropy = 0.0;
  for (double s : sigma) {
    const double p = s / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return {std::exp(entropy), sigma.size()};
}

namespace {

SpectrumReport report_from_sigma(std::vector<double> sigma) {
  SpectrumReport report;
  report.sigma = std::move(sigma);
  report.normalized.resize(report.sigma.size());
  report.log10_normalized.resize(report.sigma.size());
  const double top = report.sigma.empty() ? 0.0 : report.sigma.front();
  for (std::size_t i = 0; i < report.sigma.size(); ++i) {
    const double norm = top > 0.0 ? report.sigma[i] / top : 0.0;
    report.normalized[i] = norm;
    report.log10_normalized[i] =
        norm > 0.0 ? std::max(std::log10(norm), -16.0) : -16.0;
  }
  return report;
}

}  // namespace

SpectrumReport embedding_spectrum(const Matrix& z) {
  return report_from_sigma(svd(covariance(z)).sigma);
}

SpectrumReport singular_spectrum(const Matrix& z) {
  return report_from_sigma(svd(z).sigma);
}

std::vector<TimelinePoint> grad_rank_timeline(
    const std::vector<GradSnapshot>& snapshots) {
  if (snapshots.empty()) {
    throw ArityError("grad_rank_timeline needs at least one snapshot");
  }
  std::vector<TimelinePoint> timeline;
  timeline.reserve(snapshots.size());
  for (const GradSnapshot& snap : snapshots) {
    bool any_nonzero = false;
    for (double x : snap.grads.values()) {
      if (x != 0.0) {
        any_nonzero = true;
        break;
      }
    }
    if (!any_nonzero) continue;  // degenerate snapshot: missing point
    timeline.push_back({snap.step, rankme(snap.grads).value});
  }
  return timeline;
}

double auc(const std::vector<std::uint8_t>& labels,
           const std::vector<double>& scores) {
  if (labels.size() != scores.size()) {
    throw DimensionError("auc needs one score per label");
  }
  std::size_t pos = 0;
  for (std::uint8_t y : labels) pos += y;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw MetricError("AUC is undefined with a single class");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Rank-sum with average ranks over tie groups.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) pos_rank_sum += avg_rank;
    }
    i = j;
  }

  const double u = pos_rank_sum -
                   0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IngestError("cannot open file for writing: " + path);
  }
  return out;
}

}  // namespace

void write_spectrum_csv(const std::string& path, const SpectrumReport& report) {
  std::ofstream out = open_out(path);
  out << "index,sigma,normalized,log10_normalized\n";
  for (std::size_t i = 0; i < report.sigma.size(); ++i) {
    out << i << ',' << format_double(report.sigma[i]) << ','
        << format_double(report.normalized[i]) << ','
        << format_double(report.log10_normalized[i]) << '\n';
  }
}

void write_timeline_csv(const std::string& path,
                        const std::vector<TimelinePoint>& timeline) {
  std::ofstream out = open_out(path);
  out << "step,rankme\n";
  for (const TimelinePoint& point : timeline) {
    out << point.step << ',' << format_double(point.rankme) << '\n';
  }
}

}  // namespace fim
