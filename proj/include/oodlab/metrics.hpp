#pragma once

#include <optional>
#include <span>
#include <vector>

#include "oodlab/matrix.hpp"
#include "oodlab/provenance.hpp"

namespace oodlab::metrics {

struct ScoredSample {
  double score = 0.0;
  Provenance truth = Provenance::in_dist;
};

struct GroupStat {
  double mean = 0.0;
  double stddev = 0.0;  // population std
  int count = 0;
};

struct BetaStats {
  std::optional<GroupStat> in_dist;
  std::optional<GroupStat> out_dist;
};

struct MetricsReport {
  double aupr_micro = 0.0;
  double detection_accuracy = 0.0;
  double classification_accuracy = 0.0;
  BetaStats beta_stats;
  int epoch = 0;
};

// Threshold detector on the max-probability score; the boundary is inclusive.
Provenance detect(double score, double tau);

// Balanced accuracy 0.5*(frac in >= tau) + 0.5*(frac out < tau), maximized
// over midpoints between adjacent distinct scores plus -inf and +inf.
double detection_accuracy(std::span<const double> in_scores,
                          std::span<const double> out_scores);

// Micro-averaged area under the precision-recall curve over all N*K
// (score, is-true-class) pairs. Step-wise average precision, no
// interpolation; equal scores are processed as one group.
double aupr_micro(const Matrix& probs, std::span<const int> labels);

// Fraction of rows whose argmax (lowest index on ties) equals the label.
double classification_accuracy(const Matrix& probs, std::span<const int> labels);

// Population mean/std of the weights per provenance group; an empty group is
// reported as absent.
BetaStats beta_stats(std::span<const double> betas, std::span<const Provenance> provenance);

}  // namespace oodlab::metrics
