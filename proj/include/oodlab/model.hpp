#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "oodlab/matrix.hpp"

namespace oodlab::nn {

enum class Activation { relu, tanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Architecture of a feedforward softmax classifier. hidden_dims may be empty
// (linear softmax classifier).
struct ModelSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int num_classes = 0;
  Activation activation = Activation::relu;

  // input_dim, hidden..., num_classes
  std::vector<int> layer_dims() const;
  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  void validate() const;
};

struct Model {
  ModelSpec spec;
  std::vector<Matrix> weights;              // layer i: dims[i+1] x dims[i]
  std::vector<std::vector<double>> biases;  // layer i: dims[i+1]

  int num_layers() const { return static_cast<int>(weights.size()); }
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const Model& model);
  void add_scaled(const Gradients& other, double scale);
};

// A batch of samples; labels empty means unlabeled.
struct Batch {
  Matrix features;
  std::vector<int> labels;

  int size() const { return features.rows; }
  bool labeled() const { return !labels.empty(); }
  void validate(int input_dim, int num_classes) const;
};

// Cached per-layer values from forward, sufficient for backward.
struct ForwardTrace {
  std::vector<Matrix> layer_inputs;  // activation entering layer i; [0] is the batch features
  std::vector<Matrix> preacts;       // pre-activation of layer i; last entry is the logits
};

// Weights uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)), biases
// zero. Same (spec, seed) always yields identical parameters.
Model init_model(const ModelSpec& spec, std::uint64_t seed);

// Row-stochastic class probabilities for each input row. Softmax is
// stabilized by max-subtraction. Pass a trace to enable backward.
Matrix forward(const Model& model, const Matrix& features, ForwardTrace* trace = nullptr);

// Exact gradients of the scalar loss whose logit-gradient is supplied. Any
// batch averaging must already be baked into dloss_dlogits.
Gradients backward(const Model& model, const ForwardTrace& trace, const Matrix& dloss_dlogits);

// Mean cross-entropy over a labeled batch. Log arguments are floored at 1e-12.
double cross_entropy(const Matrix& probs, const std::vector<int>& labels);

// Logit gradient of mean cross-entropy: (probs - onehot) / N.
Matrix cross_entropy_logit_grad(const Matrix& probs, const std::vector<int>& labels);

// Central-difference gradient check: max over all parameters of
// |analytic - central| / max(1, |central|). Throws ValidationError naming the
// parameter if the loss turns non-finite at a perturbation.
double grad_check(const Model& model, const std::function<double(const Model&)>& loss,
                  const Gradients& analytic, double step);

// Text checkpoint ("oodlab-model v1"). Round-trips parameters exactly.
void write_checkpoint(const Model& model, std::ostream& out);
Model read_checkpoint(std::istream& in);
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace oodlab::nn
