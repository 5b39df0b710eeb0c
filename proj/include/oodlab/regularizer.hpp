#pragma once

#include <span>
#include <string>
#include <vector>

#include "oodlab/model.hpp"
#include "oodlab/provenance.hpp"

namespace oodlab::reg {

enum class BetaMode { none, fixed, adaptive, oracle, frozen };

const char* beta_mode_name(BetaMode mode);

// Schedule for the per-sample regularization weight.
struct RegularizerConfig {
  BetaMode mode = BetaMode::none;
  double beta0 = 0.0;                 // fixed
  double gamma = 10.0;                // adaptive
  std::vector<double> frozen_table;   // frozen: indexed by traffic sample index
  bool clamp = true;

  static RegularizerConfig none();
  static RegularizerConfig fixed(double beta0);
  static RegularizerConfig adaptive(double gamma);
  static RegularizerConfig oracle();
  static RegularizerConfig frozen(std::vector<double> table);

  void validate() const;
};

// The two addends of the traffic loss plus the weights that were applied.
struct LossBreakdown {
  double total = 0.0;
  double cross_entropy_term = 0.0;
  double regularization_term = 0.0;
  std::vector<double> per_sample_betas;
};

struct MaxProb {
  double score = 0.0;
  int index = 0;  // argmax, lowest index on ties
};

MaxProb max_prob(std::span<const double> probs_row);

inline double max_prob_score(std::span<const double> probs_row) {
  return max_prob(probs_row).score;
}

// phi(z) = 1 - 2*sigmoid(gamma*(z - 0.5)); strictly decreasing in z. With
// clamp the result is clipped to [0, 1] (raw phi is negative for z > 0.5).
double squash(double z, double gamma, bool clamp = true);

// KL(U || p) = -log K - (1/K) * sum_k log p_k, log arguments floored at 1e-12.
double kl_uniform(std::span<const double> probs_row);

// Side data a regularizer mode may need for a traffic batch.
struct TrafficMeta {
  const std::vector<Provenance>* provenance = nullptr;  // oracle
  const std::vector<int>* sample_indices = nullptr;     // frozen; null = identity
};

// Per-sample weights for a traffic batch. Adaptive mode runs a fresh forward
// pass. Returned values are constants with respect to any differentiation.
std::vector<double> compute_betas(const nn::Model& model, const Matrix& traffic_features,
                                  const RegularizerConfig& config,
                                  const TrafficMeta& meta = {});

struct TrafficLossResult {
  LossBreakdown breakdown;
  nn::Gradients grads;
};

// total = mean cross-entropy over the labeled batch
//       + mean over the traffic batch of beta(x) * KL(U || P(y|x)).
// beta(x) is held constant during the backward pass; the logit gradient of one
// traffic sample's KL term is beta * (p - u) / N_traffic.
TrafficLossResult traffic_loss(const nn::Model& model, const nn::Batch& labeled,
                               const nn::Batch& traffic, const RegularizerConfig& config,
                               const TrafficMeta& meta = {});

}  // namespace oodlab::reg
