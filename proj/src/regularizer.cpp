#include "oodlab/regularizer.hpp"

#include <algorithm>
#include <cmath>

#include "oodlab/errors.hpp"

namespace oodlab::reg {

namespace {

constexpr double kLogFloor = 1e-12;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

const char* beta_mode_name(BetaMode mode) {
  switch (mode) {
    case BetaMode::none: return "none";
    case BetaMode::fixed: return "fixed";
    case BetaMode::adaptive: return "adaptive";
    case BetaMode::oracle: return "oracle";
    case BetaMode::frozen: return "frozen";
  }
  return "?";
}

RegularizerConfig RegularizerConfig::none() { return RegularizerConfig{}; }

RegularizerConfig RegularizerConfig::fixed(double beta0) {
  RegularizerConfig c;
  c.mode = BetaMode::fixed;
  c.beta0 = beta0;
  c.validate();
  return c;
}

RegularizerConfig RegularizerConfig::adaptive(double gamma) {
  RegularizerConfig c;
  c.mode = BetaMode::adaptive;
  c.gamma = gamma;
  c.validate();
  return c;
}

RegularizerConfig RegularizerConfig::oracle() {
  RegularizerConfig c;
  c.mode = BetaMode::oracle;
  return c;
}

RegularizerConfig RegularizerConfig::frozen(std::vector<double> table) {
  RegularizerConfig c;
  c.mode = BetaMode::frozen;
  c.frozen_table = std::move(table);
  return c;
}

void RegularizerConfig::validate() const {
  if (mode == BetaMode::fixed && beta0 < 0.0) {
    throw ValidationError("fixed beta must be >= 0");
  }
  if (mode == BetaMode::adaptive && !(gamma > 0.0)) {
    throw ValidationError("adaptive gamma must be > 0");
  }
}

MaxProb max_prob(std::span<const double> probs_row) {
  if (probs_row.empty()) throw ValidationError("max_prob on empty row");
  MaxProb best{probs_row[0], 0};
  for (std::size_t k = 1; k < probs_row.size(); ++k) {
    if (probs_row[k] > best.score) {
      best.score = probs_row[k];
      best.index = static_cast<int>(k);
    }
  }
  return best;
}

double squash(double z, double gamma, bool clamp) {
  if (!(z >= 0.0 && z <= 1.0)) {
    throw ValidationError("squash input must lie in [0, 1]");
  }
  if (!(gamma > 0.0)) throw ValidationError("squash gamma must be > 0");
  double beta = 1.0 - 2.0 * sigmoid(gamma * (z - 0.5));
  if (clamp) beta = std::clamp(beta, 0.0, 1.0);
  return beta;
}

double kl_uniform(std::span<const double> probs_row) {
  const std::size_t k = probs_row.size();
  if (k == 0) throw ValidationError("kl_uniform on empty row");
  double log_sum = 0.0;
  for (double p : probs_row) log_sum += std::log(std::max(p, kLogFloor));
  return -std::log(static_cast<double>(k)) - log_sum / static_cast<double>(k);
}

std::vector<double> compute_betas(const nn::Model& model, const Matrix& traffic_features,
                                  const RegularizerConfig& config, const TrafficMeta& meta) {
  config.validate();
  const int n = traffic_features.rows;
  std::vector<double> betas(n, 0.0);
  switch (config.mode) {
    case BetaMode::none:
      break;
    case BetaMode::fixed:
      std::fill(betas.begin(), betas.end(), config.beta0);
      break;
    case BetaMode::adaptive: {
      const Matrix probs = nn::forward(model, traffic_features);
      for (int i = 0; i < n; ++i) {
        betas[i] = squash(max_prob_score(probs.row(i)), config.gamma, config.clamp);
      }
      break;
    }
    case BetaMode::oracle: {
      if (!meta.provenance) {
        throw ValidationError("oracle regularization requires provenance tags");
      }
      if (static_cast<int>(meta.provenance->size()) != n) {
        throw ValidationError("provenance tag count does not match traffic batch");
      }
      for (int i = 0; i < n; ++i) {
        betas[i] = (*meta.provenance)[i] == Provenance::out_dist ? 1.0 : 0.0;
      }
      break;
    }
    case BetaMode::frozen: {
      for (int i = 0; i < n; ++i) {
        const int idx = meta.sample_indices ? (*meta.sample_indices)[i] : i;
        if (idx < 0 || idx >= static_cast<int>(config.frozen_table.size())) {
          throw ValidationError("frozen beta table has no entry for traffic sample " +
                                std::to_string(idx));
        }
        betas[i] = config.frozen_table[idx];
      }
      break;
    }
  }
  return betas;
}

TrafficLossResult traffic_loss(const nn::Model& model, const nn::Batch& labeled,
                               const nn::Batch& traffic, const RegularizerConfig& config,
                               const TrafficMeta& meta) {
  if (labeled.size() < 1 || traffic.size() < 1) {
    throw ValidationError("traffic_loss requires non-empty labeled and traffic batches");
  }
  if (!labeled.labeled()) throw ValidationError("labeled batch must carry labels");
  if (traffic.labeled()) throw ValidationError("traffic batch must be unlabeled");
  labeled.validate(model.spec.input_dim, model.spec.num_classes);
  traffic.validate(model.spec.input_dim, model.spec.num_classes);

  TrafficLossResult result;
  result.breakdown.per_sample_betas = compute_betas(model, traffic.features, config, meta);

  nn::ForwardTrace labeled_trace;
  const Matrix labeled_probs = nn::forward(model, labeled.features, &labeled_trace);
  result.breakdown.cross_entropy_term = nn::cross_entropy(labeled_probs, labeled.labels);
  const Matrix ce_grad = nn::cross_entropy_logit_grad(labeled_probs, labeled.labels);
  result.grads = nn::backward(model, labeled_trace, ce_grad);

  const std::vector<double>& betas = result.breakdown.per_sample_betas;
  const int m = traffic.size();
  const int k = model.spec.num_classes;
  const double uniform = 1.0 / k;
  bool any_active = false;
  for (double b : betas) any_active = any_active || b != 0.0;

  double reg_term = 0.0;
  if (any_active) {
    nn::ForwardTrace traffic_trace;
    const Matrix traffic_probs = nn::forward(model, traffic.features, &traffic_trace);
    Matrix kl_grad(m, k);
    for (int i = 0; i < m; ++i) {
      if (betas[i] == 0.0) continue;
      reg_term += betas[i] * kl_uniform(traffic_probs.row(i));
      const double scale = betas[i] / m;
      for (int j = 0; j < k; ++j) {
        kl_grad(i, j) = scale * (traffic_probs(i, j) - uniform);
      }
    }
    reg_term /= m;
    result.grads.add_scaled(nn::backward(model, traffic_trace, kl_grad), 1.0);
  }

  result.breakdown.regularization_term = reg_term;
  result.breakdown.total = result.breakdown.cross_entropy_term + reg_term;
  return result;
}

}  // namespace oodlab::reg
