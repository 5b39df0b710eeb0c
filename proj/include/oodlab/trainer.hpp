#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "oodlab/data.hpp"
#include "oodlab/metrics.hpp"
#include "oodlab/model.hpp"
#include "oodlab/regularizer.hpp"

namespace oodlab::train {

// Two-phase online schedule: base_epochs with no regularization and no
// traffic term, then tune_epochs with tune_regularizer on the traffic set.
struct FineTuneSpec {
  int base_epochs = 0;
  int tune_epochs = 0;
  reg::RegularizerConfig tune_regularizer;
};

struct TrainConfig {
  int epochs = 1;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  reg::RegularizerConfig regularizer;
  std::optional<FineTuneSpec> fine_tune;

  void validate() const;
};

enum class Phase { base, tune };

// traffic_betas records the adaptive weight the epoch-end model would assign
// to each traffic sample (the analysis signal), regardless of the mode the
// run trained with.
struct EpochRecord {
  int epoch = 0;  // 1-based, global across phases
  Phase phase = Phase::base;
  metrics::MetricsReport report;
  std::vector<double> traffic_betas;
};

struct EvalSets {
  const data::LabeledDataset* in_test = nullptr;
  const Matrix* out_eval = nullptr;  // detection negatives; optional
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  nn::Model final_model;
};

// End-of-epoch evaluation; also usable standalone on a loaded checkpoint.
metrics::MetricsReport evaluate_model(const nn::Model& model, const EvalSets& eval,
                                      const data::TrafficSet* traffic,
                                      double snapshot_gamma, int epoch,
                                      std::vector<double>* betas_out = nullptr);

// Minibatch SGD with momentum on the traffic loss. Per epoch: seeded shuffle
// of the labeled data; one traffic minibatch per labeled minibatch, equal
// size, cycled through a per-epoch seeded shuffle of the traffic set.
// Adaptive beta values are recomputed on every forward pass. Throws
// DivergenceError on non-finite loss.
TrainHistory train(const nn::ModelSpec& spec, const TrainConfig& config,
                   const data::LabeledDataset& train_data, const data::TrafficSet& traffic,
                   const EvalSets& eval);

// Continue SGD from an existing model for `epochs` more epochs under the
// given regularizer. Momentum starts from zero; epoch_offset aligns shuffle
// streams and epoch numbering with a preceding phase.
TrainHistory continue_training(const nn::Model& start, const TrainConfig& config,
                               const reg::RegularizerConfig& regularizer, int epochs,
                               int epoch_offset, const data::LabeledDataset& train_data,
                               const data::TrafficSet& traffic, const EvalSets& eval);

// Phase 1: base_epochs, no regularization, no traffic term. Phase 2:
// tune_epochs with fine_tune.tune_regularizer on the traffic set.
TrainHistory online_fine_tune(const nn::ModelSpec& spec, const TrainConfig& config,
                              const data::LabeledDataset& train_data,
                              const data::TrafficSet& traffic, const EvalSets& eval);

// Feedback-effect ablation: adaptive betas are computed once from the base
// model and held fixed while fine-tuning.
TrainHistory freeze_and_fine_tune(const nn::Model& model_after_base, const TrainConfig& config,
                                  const data::LabeledDataset& train_data,
                                  const data::TrafficSet& traffic, int tune_epochs,
                                  double gamma, const EvalSets& eval, int epoch_offset = 0);

struct GammaTuneResult {
  double gamma = 0.0;
  bool warning = false;  // nothing on the grid qualified; largest returned
  double baseline_aupr = 0.0;
  std::vector<std::pair<double, double>> per_gamma;  // (gamma, holdout AUPR)
};

// Smallest grid value whose trained model keeps holdout AUPR within
// kGammaTuneEpsilon of the unregularized baseline.
inline constexpr double kGammaTuneEpsilon = 0.005;

GammaTuneResult tune_gamma(std::span<const double> grid, const nn::ModelSpec& spec,
                           const TrainConfig& base_config,
                           const data::LabeledDataset& train_data,
                           const data::LabeledDataset& holdout,
                           const data::TrafficSet& traffic);

}  // namespace oodlab::train
