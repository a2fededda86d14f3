#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fim/linalg.hpp"

namespace fim {

// Smooth rank estimate: exp of the Shannon entropy of the L1-normalized
// singular values. Lies in [1, min(N, K)].
struct RankMeScore {
  double value = 0.0;
  std::size_t n_singular = 0;
};

// Singular values of the covariance of a representation matrix, plus the
// normalized and log10-normalized series used for spectrum plots.
struct SpectrumReport {
  std::vector<double> sigma;
  std::vector<double> normalized;         // sigma_k / sigma_1
  std::vector<double> log10_normalized;   // floored at -16
};

// Embedding-gradient matrix captured at one training step.
struct GradSnapshot {
  std::size_t step = 0;
  Matrix grads;
};

struct TimelinePoint {
  std::size_t step = 0;
  double rankme = 0.0;
};

RankMeScore rankme(const Matrix& z);

// Spectrum of the covariance of z (the collapse-diagnosis protocol).
SpectrumReport embedding_spectrum(const Matrix& z);

// Spectrum of z itself; sigma(C) = sigma(Z)^2 / B, so the two reports are
// deliberately distinct and labeled by their file names.
SpectrumReport singular_spectrum(const Matrix& z);

// One RankMe per snapshot; all-zero snapshots are skipped rather than
// reported, so the result can be shorter than the input.
std::vector<TimelinePoint> grad_rank_timeline(
    const std::vector<GradSnapshot>& snapshots);

// Mann-Whitney AUC with tie correction, computed exactly via sorting.
// Throws MetricError unless both classes are present.
double auc(const std::vector<std::uint8_t>& labels,
           const std::vector<double>& scores);

// CSV emitters: one header line, LF endings, full double precision.
void write_spectrum_csv(const std::string& path, const SpectrumReport& report);
void write_timeline_csv(const std::string& path,
                        const std::vector<TimelinePoint>& timeline);

}  // namespace fim
