#include "oodlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oodlab/errors.hpp"

namespace oodlab::metrics {

Provenance detect(double score, double tau) {
  return score >= tau ? Provenance::in_dist : Provenance::out_dist;
}

double detection_accuracy(std::span<const double> in_scores,
                          std::span<const double> out_scores) {
  if (in_scores.empty() || out_scores.empty()) {
    throw ValidationError("detection_accuracy requires non-empty score lists");
  }
  std::vector<double> all;
  all.reserve(in_scores.size() + out_scores.size());
  all.insert(all.end(), in_scores.begin(), in_scores.end());
  all.insert(all.end(), out_scores.begin(), out_scores.end());
  for (double s : all) {
    if (!std::isfinite(s)) throw ValidationError("detection scores must be finite");
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    candidates.push_back(0.5 * (all[i] + all[i + 1]));
  }
  candidates.push_back(std::numeric_limits<double>::infinity());

  double best = 0.0;
  for (double tau : candidates) {
    std::size_t in_hit = 0;
    for (double s : in_scores) in_hit += (s >= tau) ? 1 : 0;
    std::size_t out_hit = 0;
    for (double s : out_scores) out_hit += (s < tau) ? 1 : 0;
    const double acc = 0.5 * (static_cast<double>(in_hit) / in_scores.size()) +
                       0.5 * (static_cast<double>(out_hit) / out_scores.size());
    best = std::max(best, acc);
  }
  return best;
}

double aupr_micro(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows < 1) throw ValidationError("aupr_micro requires at least one row");
  if (static_cast<int>(labels.size()) != probs.rows) {
    throw ValidationError("label count does not match probability rows");
  }
  const int n = probs.rows;
  const int k = probs.cols;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k) throw ValidationError("label outside class range");
  }

  struct Pair {
    double score;
    bool positive;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * k);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < k; ++c) {
      pairs.push_back({probs(i, c), c == labels[i]});
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.score > b.score; });

  const double total_positives = static_cast<double>(n);
  double ap = 0.0;
  std::size_t cum_tp = 0;
  std::size_t cum_seen = 0;
  std::size_t i = 0;
  while (i < pairs.size()) {
    std::size_t j = i;
    std::size_t group_tp = 0;
    while (j < pairs.size() && pairs[j].score == pairs[i].score) {
      group_tp += pairs[j].positive ? 1 : 0;
      ++j;
    }
    cum_tp += group_tp;
    cum_seen += j - i;
    if (group_tp > 0) {
      const double precision = static_cast<double>(cum_tp) / cum_seen;
      ap += (static_cast<double>(group_tp) / total_positives) * precision;
    }
    i = j;
  }
  return ap;
}

double classification_accuracy(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows < 1) throw ValidationError("classification_accuracy requires rows");
  if (static_cast<int>(labels.size()) != probs.rows) {
    throw ValidationError("label count does not match probability rows");
  }
  int correct = 0;
  for (int i = 0; i < probs.rows; ++i) {
    int arg = 0;
    double best = probs(i, 0);
    for (int c = 1; c < probs.cols; ++c) {
      if (probs(i, c) > best) {
        best = probs(i, c);
        arg = c;
      }
    }
    correct += arg == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / probs.rows;
}

BetaStats beta_stats(std::span<const double> betas, std::span<const Provenance> provenance) {
  if (betas.size() != provenance.size()) {
    throw ValidationError("beta_stats requires aligned beta and provenance lists");
  }
  auto group_stat = [&](Provenance which) -> std::optional<GroupStat> {
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
      if (provenance[i] == which) {
        sum += betas[i];
        ++count;
      }
    }
    if (count == 0) return std::nullopt;
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
      if (provenance[i] == which) {
        const double d = betas[i] - mean;
        sq += d * d;
      }
    }
    return GroupStat{mean, std::sqrt(sq / count), count};
  };
  BetaStats stats;
  stats.in_dist = group_stat(Provenance::in_dist);
  stats.out_dist = group_stat(Provenance::out_dist);
  return stats;
}

}  // namespace oodlab::metrics
