#include "oodlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "oodlab/errors.hpp"
#include "oodlab/rng.hpp"

namespace oodlab::train {

namespace {

// stream ids for derive_seed
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kLabeledShuffleStream = 2;
constexpr std::uint64_t kTrafficShuffleStream = 3;

double snapshot_gamma_for(const TrainConfig& config) {
  if (config.regularizer.mode == reg::BetaMode::adaptive) return config.regularizer.gamma;
  if (config.fine_tune && config.fine_tune->tune_regularizer.mode == reg::BetaMode::adaptive) {
    return config.fine_tune->tune_regularizer.gamma;
  }
  return 10.0;
}

std::vector<double> detection_scores(const nn::Model& model, const Matrix& features) {
  const Matrix probs = nn::forward(model, features);
  std::vector<double> scores(probs.rows);
  for (int i = 0; i < probs.rows; ++i) scores[i] = reg::max_prob_score(probs.row(i));
  return scores;
}

void check_model_finite(const nn::Model& model, int epoch) {
  for (const Matrix& w : model.weights) {
    if (!all_finite(w)) {
      throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch));
    }
  }
  for (const auto& b : model.biases) {
    for (double v : b) {
      if (!std::isfinite(v)) {
        throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch));
      }
    }
  }
}

Matrix gather_rows(const Matrix& source, std::span<const int> rows) {
  Matrix out(static_cast<int>(rows.size()), source.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < source.cols; ++c) {
      out(static_cast<int>(i), c) = source(rows[i], c);
    }
  }
  return out;
}

// One SGD phase over [epoch_offset+1, epoch_offset+epochs]. The velocity
// starts at zero, so phase boundaries reset momentum.
void run_phase(nn::Model& model, const TrainConfig& config,
               const reg::RegularizerConfig& regularizer, int epochs, int epoch_offset,
               Phase phase, const data::LabeledDataset& train_data,
               const data::TrafficSet& traffic, const EvalSets& eval,
               std::vector<EpochRecord>& records) {
  regularizer.validate();
  if (regularizer.mode == reg::BetaMode::oracle &&
      traffic.provenance.size() != static_cast<std::size_t>(traffic.size())) {
    throw ValidationError("oracle regularization requires traffic provenance tags");
  }
  const int n = train_data.size();
  const int m = traffic.size();
  const bool use_traffic = m > 0 && regularizer.mode != reg::BetaMode::none;
  const double snapshot_gamma = snapshot_gamma_for(config);

  nn::Gradients velocity = nn::Gradients::zeros_like(model);
  std::vector<int> labeled_order(n);
  std::vector<int> traffic_order(m);

  for (int e = 0; e < epochs; ++e) {
    const int epoch = epoch_offset + e + 1;

    std::iota(labeled_order.begin(), labeled_order.end(), 0);
    auto labeled_rng = make_rng(derive_seed(derive_seed(config.seed, kLabeledShuffleStream),
                                            static_cast<std::uint64_t>(epoch)));
    std::shuffle(labeled_order.begin(), labeled_order.end(), labeled_rng);

    std::size_t traffic_cursor = 0;
    if (use_traffic) {
      std::iota(traffic_order.begin(), traffic_order.end(), 0);
      auto traffic_rng = make_rng(derive_seed(derive_seed(config.seed, kTrafficShuffleStream),
                                              static_cast<std::uint64_t>(epoch)));
      std::shuffle(traffic_order.begin(), traffic_order.end(), traffic_rng);
    }

    int batch_index = 0;
    for (int start = 0; start < n; start += config.batch_size, ++batch_index) {
      const int count = std::min(config.batch_size, n - start);
      std::span<const int> rows(labeled_order.data() + start, static_cast<std::size_t>(count));
      nn::Batch labeled;
      labeled.features = gather_rows(train_data.features, rows);
      labeled.labels.resize(count);
      for (int i = 0; i < count; ++i) labeled.labels[i] = train_data.labels[rows[i]];

      double loss_total = 0.0;
      nn::Gradients grads = nn::Gradients::zeros_like(model);
      if (use_traffic) {
        std::vector<int> traffic_rows(count);
        for (int i = 0; i < count; ++i) {
          traffic_rows[i] = traffic_order[traffic_cursor];
          traffic_cursor = (traffic_cursor + 1) % traffic_order.size();
        }
        nn::Batch traffic_batch;
        traffic_batch.features = gather_rows(traffic.features, traffic_rows);

        std::vector<Provenance> tags;
        reg::TrafficMeta meta;
        meta.sample_indices = &traffic_rows;
        if (regularizer.mode == reg::BetaMode::oracle) {
          tags.resize(count);
          for (int i = 0; i < count; ++i) tags[i] = traffic.provenance[traffic_rows[i]];
          meta.provenance = &tags;
        }
        reg::TrafficLossResult result =
            reg::traffic_loss(model, labeled, traffic_batch, regularizer, meta);
        loss_total = result.breakdown.total;
        grads = std::move(result.grads);
      } else {
        nn::ForwardTrace trace;
        const Matrix probs = nn::forward(model, labeled.features, &trace);
        loss_total = nn::cross_entropy(probs, labeled.labels);
        grads = nn::backward(model, trace, nn::cross_entropy_logit_grad(probs, labeled.labels));
      }

      if (!std::isfinite(loss_total)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                              std::to_string(batch_index));
      }

      // v = momentum*v - lr*g; theta += v
      for (int l = 0; l < model.num_layers(); ++l) {
        Matrix& vw = velocity.weights[l];
        Matrix& w = model.weights[l];
        const Matrix& gw = grads.weights[l];
        for (std::size_t i = 0; i < w.data.size(); ++i) {
          vw.data[i] = config.momentum * vw.data[i] - config.learning_rate * gw.data[i];
          w.data[i] += vw.data[i];
        }
        std::vector<double>& vb = velocity.biases[l];
        std::vector<double>& b = model.biases[l];
        const std::vector<double>& gb = grads.biases[l];
        for (std::size_t i = 0; i < b.size(); ++i) {
          vb[i] = config.momentum * vb[i] - config.learning_rate * gb[i];
          b[i] += vb[i];
        }
      }
    }

    check_model_finite(model, epoch);

    EpochRecord record;
    record.epoch = epoch;
    record.phase = phase;
    record.report = evaluate_model(model, eval, traffic.size() > 0 ? &traffic : nullptr,
                                   snapshot_gamma, epoch, &record.traffic_betas);
    records.push_back(std::move(record));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
  regularizer.validate();
  if (fine_tune) {
    if (fine_tune->base_epochs < 0 || fine_tune->tune_epochs < 0) {
      throw ValidationError("fine_tune epochs must be >= 0");
    }
    fine_tune->tune_regularizer.validate();
  }
}

metrics::MetricsReport evaluate_model(const nn::Model& model, const EvalSets& eval,
                                      const data::TrafficSet* traffic, double snapshot_gamma,
                                      int epoch, std::vector<double>* betas_out) {
  metrics::MetricsReport report;
  report.epoch = epoch;
  if (eval.in_test) {
    const Matrix probs = nn::forward(model, eval.in_test->features);
    report.aupr_micro = metrics::aupr_micro(probs, eval.in_test->labels);
    report.classification_accuracy = metrics::classification_accuracy(probs, eval.in_test->labels);
    if (eval.out_eval) {
      std::vector<double> in_scores(probs.rows);
      for (int i = 0; i < probs.rows; ++i) in_scores[i] = reg::max_prob_score(probs.row(i));
      const std::vector<double> out_scores = detection_scores(model, *eval.out_eval);
      report.detection_accuracy = metrics::detection_accuracy(in_scores, out_scores);
    }
  }
  if (traffic && traffic->size() > 0) {
    const std::vector<double> betas = reg::compute_betas(
        model, traffic->features, reg::RegularizerConfig::adaptive(snapshot_gamma));
    report.beta_stats = metrics::beta_stats(betas, traffic->provenance);
    if (betas_out) *betas_out = betas;
  }
  return report;
}

TrainHistory train(const nn::ModelSpec& spec, const TrainConfig& config,
                   const data::LabeledDataset& train_data, const data::TrafficSet& traffic,
                   const EvalSets& eval) {
  config.validate();
  if (train_data.size() < 1) throw ValidationError("training data must be non-empty");
  TrainHistory history;
  history.final_model = nn::init_model(spec, derive_seed(config.seed, kInitStream));
  run_phase(history.final_model, config, config.regularizer, config.epochs, 0, Phase::base,
            train_data, traffic, eval, history.epochs);
  return history;
}

TrainHistory continue_training(const nn::Model& start, const TrainConfig& config,
                               const reg::RegularizerConfig& regularizer, int epochs,
                               int epoch_offset, const data::LabeledDataset& train_data,
                               const data::TrafficSet& traffic, const EvalSets& eval) {
  config.validate();
  TrainHistory history;
  history.final_model = start;
  run_phase(history.final_model, config, regularizer, epochs, epoch_offset, Phase::tune,
            train_data, traffic, eval, history.epochs);
  return history;
}

TrainHistory online_fine_tune(const nn::ModelSpec& spec, const TrainConfig& config,
                              const data::LabeledDataset& train_data,
                              const data::TrafficSet& traffic, const EvalSets& eval) {
  config.validate();
  if (!config.fine_tune) throw ValidationError("online_fine_tune requires a fine_tune schedule");
  const FineTuneSpec& ft = *config.fine_tune;

  TrainHistory history;
  history.final_model = nn::init_model(spec, derive_seed(config.seed, kInitStream));
  const data::TrafficSet no_traffic;
  if (ft.base_epochs > 0) {
    // phase 1 sees no traffic at all, but the snapshot signal still tracks
    // the real traffic set for analysis
    run_phase(history.final_model, config, reg::RegularizerConfig::none(), ft.base_epochs, 0,
              Phase::base, train_data, traffic, eval, history.epochs);
  }
  if (ft.tune_epochs > 0) {
    run_phase(history.final_model, config, ft.tune_regularizer, ft.tune_epochs, ft.base_epochs,
              Phase::tune, train_data, traffic, eval, history.epochs);
  }
  return history;
}

TrainHistory freeze_and_fine_tune(const nn::Model& model_after_base, const TrainConfig& config,
                                  const data::LabeledDataset& train_data,
                                  const data::TrafficSet& traffic, int tune_epochs, double gamma,
                                  const EvalSets& eval, int epoch_offset) {
  config.validate();
  if (tune_epochs < 0) throw ValidationError("tune_epochs must be >= 0");
  std::vector<double> table = reg::compute_betas(model_after_base, traffic.features,
                                                 reg::RegularizerConfig::adaptive(gamma));
  TrainHistory history;
  history.final_model = model_after_base;
  if (tune_epochs > 0) {
    run_phase(history.final_model, config, reg::RegularizerConfig::frozen(std::move(table)),
              tune_epochs, epoch_offset, Phase::tune, train_data, traffic, eval, history.epochs);
  }
  return history;
}

GammaTuneResult tune_gamma(std::span<const double> grid, const nn::ModelSpec& spec,
                           const TrainConfig& base_config,
                           const data::LabeledDataset& train_data,
                           const data::LabeledDataset& holdout,
                           const data::TrafficSet& traffic) {
  if (grid.empty()) throw ValidationError("gamma grid must be non-empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw ValidationError("gamma grid values must be > 0");
    if (i > 0 && grid[i] <= grid[i - 1]) throw ValidationError("gamma grid must be ascending");
  }
  if (holdout.size() < 1) throw ValidationError("gamma tuning requires a holdout set");

  const EvalSets no_eval;
  auto holdout_aupr = [&](const nn::Model& model) {
    const Matrix probs = nn::forward(model, holdout.features);
    return metrics::aupr_micro(probs, holdout.labels);
  };

  TrainConfig cfg = base_config;
  cfg.regularizer = reg::RegularizerConfig::none();
  const double baseline = holdout_aupr(
      train(spec, cfg, train_data, traffic, no_eval).final_model);

  GammaTuneResult result;
  result.baseline_aupr = baseline;
  result.per_gamma.reserve(grid.size());
  for (double gamma : grid) {
    cfg.regularizer = reg::RegularizerConfig::adaptive(gamma);
    const double aupr = holdout_aupr(
        train(spec, cfg, train_data, traffic, no_eval).final_model);
    result.per_gamma.emplace_back(gamma, aupr);
  }
  for (const auto& [gamma, aupr] : result.per_gamma) {
    if (aupr >= baseline - kGammaTuneEpsilon) {
      result.gamma = gamma;
      return result;
    }
  }
  result.gamma = grid.back();
  result.warning = true;
  return result;
}

}  // namespace oodlab::train
