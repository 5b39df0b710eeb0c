#include "oodlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "oodlab/errors.hpp"
#include "oodlab/rng.hpp"

namespace oodlab::nn {

namespace {

constexpr double kLogFloor = 1e-12;

void softmax_row(std::span<const double> logits, std::span<double> out) {
  double max_logit = logits[0];
  for (double v : logits) max_logit = std::max(max_logit, v);
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - max_logit);
    sum += out[k];
  }
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] /= sum;
}

double activate(double z, Activation a) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// derivative expressed through the pre-activation value
double activate_deriv(double z, Activation a) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  double t = std::tanh(z);
  return 1.0 - t * t;
}

}  // namespace

const char* activation_name(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ValidationError("unknown activation: " + name);
}

std::vector<int> ModelSpec::layer_dims() const {
  std::vector<int> dims;
  dims.reserve(hidden_dims.size() + 2);
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(num_classes);
  return dims;
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ValidationError("input_dim must be >= 1");
  if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
  for (int h : hidden_dims) {
    if (h < 1) throw ValidationError("hidden dims must be >= 1");
  }
}

Gradients Gradients::zeros_like(const Model& model) {
  Gradients g;
  g.weights.reserve(model.weights.size());
  g.biases.reserve(model.biases.size());
  for (const Matrix& w : model.weights) g.weights.emplace_back(w.rows, w.cols);
  for (const auto& b : model.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].data.size(); ++i) {
      weights[l].data[i] += scale * other.weights[l].data[i];
    }
    for (std::size_t i = 0; i < biases[l].size(); ++i) {
      biases[l][i] += scale * other.biases[l][i];
    }
  }
}

void Batch::validate(int input_dim, int num_classes) const {
  if (features.rows < 1) throw ValidationError("batch must contain at least one sample");
  if (features.cols != input_dim) {
    throw ValidationError("batch feature width " + std::to_string(features.cols) +
                          " does not match model input_dim " + std::to_string(input_dim));
  }
  if (!all_finite(features)) throw ValidationError("batch features must be finite");
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != features.rows) {
      throw ValidationError("label count does not match batch size");
    }
    for (int y : labels) {
      if (y < 0 || y >= num_classes) {
        throw ValidationError("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(num_classes) + ")");
      }
    }
  }
}

Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model model;
  model.spec = spec;
  const std::vector<int> dims = spec.layer_dims();
  std::mt19937_64 rng = make_rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(fan_out, fan_in);
    for (double& v : w.data) v = dist(rng);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

Matrix forward(const Model& model, const Matrix& features, ForwardTrace* trace) {
  if (features.cols != model.spec.input_dim) {
    throw ValidationError("feature width " + std::to_string(features.cols) +
                          " does not match model input_dim " +
                          std::to_string(model.spec.input_dim));
  }
  const int num_layers = model.num_layers();
  if (trace) {
    trace->layer_inputs.clear();
    trace->preacts.clear();
    trace->layer_inputs.reserve(num_layers);
    trace->preacts.reserve(num_layers);
  }

  Matrix current = features;
  for (int l = 0; l < num_layers; ++l) {
    const Matrix& w = model.weights[l];
    const std::vector<double>& b = model.biases[l];
    Matrix z(current.rows, w.rows);
    for (int i = 0; i < current.rows; ++i) {
      for (int j = 0; j < w.rows; ++j) {
        double acc = b[j];
        for (int k = 0; k < w.cols; ++k) acc += w(j, k) * current(i, k);
        z(i, j) = acc;
      }
    }
    if (trace) {
      trace->layer_inputs.push_back(std::move(current));
      trace->preacts.push_back(z);
    }
    if (l + 1 < num_layers) {
      Matrix a(z.rows, z.cols);
      for (std::size_t i = 0; i < z.data.size(); ++i) {
        a.data[i] = activate(z.data[i], model.spec.activation);
      }
      current = std::move(a);
    } else {
      current = std::move(z);
    }
  }

  Matrix probs(current.rows, current.cols);
  for (int i = 0; i < current.rows; ++i) softmax_row(current.row(i), probs.row(i));
  return probs;
}

Gradients backward(const Model& model, const ForwardTrace& trace, const Matrix& dloss_dlogits) {
  const int num_layers = model.num_layers();
  if (static_cast<int>(trace.preacts.size()) != num_layers) {
    throw ValidationError("forward trace does not match model depth");
  }
  if (!dloss_dlogits.same_shape(trace.preacts.back())) {
    throw ValidationError("logit gradient shape does not match trace");
  }

  Gradients grads = Gradients::zeros_like(model);
  Matrix delta = dloss_dlogits;  // gradient wrt pre-activation of current layer
  for (int l = num_layers - 1; l >= 0; --l) {
    const Matrix& input = trace.layer_inputs[l];
    Matrix& gw = grads.weights[l];
    std::vector<double>& gb = grads.biases[l];
    for (int i = 0; i < delta.rows; ++i) {
      for (int j = 0; j < delta.cols; ++j) {
        const double d = delta(i, j);
        if (d == 0.0) continue;
        gb[j] += d;
        for (int k = 0; k < input.cols; ++k) gw(j, k) += d * input(i, k);
      }
    }
    if (l > 0) {
      const Matrix& w = model.weights[l];
      const Matrix& preact = trace.preacts[l - 1];
      Matrix next(delta.rows, w.cols);
      for (int i = 0; i < delta.rows; ++i) {
        for (int k = 0; k < w.cols; ++k) {
          double acc = 0.0;
          for (int j = 0; j < delta.cols; ++j) acc += delta(i, j) * w(j, k);
          next(i, k) = acc * activate_deriv(preact(i, k), model.spec.activation);
        }
      }
      delta = std::move(next);
    }
  }
  return grads;
}

double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != probs.rows) {
    throw ValidationError("label count does not match probability rows");
  }
  double total = 0.0;
  for (int i = 0; i < probs.rows; ++i) {
    total -= std::log(std::max(probs(i, labels[i]), kLogFloor));
  }
  return total / probs.rows;
}

Matrix cross_entropy_logit_grad(const Matrix& probs, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != probs.rows) {
    throw ValidationError("label count does not match probability rows");
  }
  Matrix grad(probs.rows, probs.cols);
  const double inv_n = 1.0 / probs.rows;
  for (int i = 0; i < probs.rows; ++i) {
    for (int k = 0; k < probs.cols; ++k) {
      grad(i, k) = (probs(i, k) - (k == labels[i] ? 1.0 : 0.0)) * inv_n;
    }
  }
  return grad;
}

double grad_check(const Model& model, const std::function<double(const Model&)>& loss,
                  const Gradients& analytic, double step) {
  Model probe = model;
  double max_rel_err = 0.0;

  auto check_param = [&](double& param, double analytic_grad, const std::string& name) {
    const double saved = param;
    param = saved + step;
    const double up = loss(probe);
    param = saved - step;
    const double down = loss(probe);
    param = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw ValidationError("non-finite loss while perturbing parameter " + name);
    }
    const double central = (up - down) / (2.0 * step);
    const double rel = std::abs(analytic_grad - central) / std::max(1.0, std::abs(central));
    max_rel_err = std::max(max_rel_err, rel);
  };

  for (int l = 0; l < probe.num_layers(); ++l) {
    Matrix& w = probe.weights[l];
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      check_param(w.data[i], analytic.weights[l].data[i],
                  "W" + std::to_string(l) + "[" + std::to_string(i) + "]");
    }
    std::vector<double>& b = probe.biases[l];
    for (std::size_t i = 0; i < b.size(); ++i) {
      check_param(b[i], analytic.biases[l][i],
                  "b" + std::to_string(l) + "[" + std::to_string(i) + "]");
    }
  }
  return max_rel_err;
}

namespace {

void write_value(std::ostream& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void write_checkpoint(const Model& model, std::ostream& out) {
  out << "oodlab-model v1\n";
  out << "dims=";
  const std::vector<int> dims = model.spec.layer_dims();
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out << ',';
    out << dims[i];
  }
  out << " activation=" << activation_name(model.spec.activation);
  out << " k=" << model.spec.num_classes << "\n";
  for (int l = 0; l < model.num_layers(); ++l) {
    out << "W" << l;
    for (double v : model.weights[l].data) {
      out << ' ';
      write_value(out, v);
    }
    out << '\n';
    out << "b" << l;
    for (double v : model.biases[l]) {
      out << ' ';
      write_value(out, v);
    }
    out << '\n';
  }
}

Model read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "oodlab-model v1") {
    throw ValidationError("checkpoint: missing 'oodlab-model v1' header");
  }
  if (!std::getline(in, line)) throw ValidationError("checkpoint: missing spec line");

  std::vector<int> dims;
  std::string activation;
  int k = 0;
  {
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw ValidationError("checkpoint: malformed spec field '" + field + "'");
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "dims") {
        std::istringstream ds(value);
        std::string tok;
        while (std::getline(ds, tok, ',')) dims.push_back(std::stoi(tok));
      } else if (key == "activation") {
        activation = value;
      } else if (key == "k") {
        k = std::stoi(value);
      } else {
        throw ValidationError("checkpoint: unknown spec field '" + key + "'");
      }
    }
  }
  if (dims.size() < 2) throw ValidationError("checkpoint: dims must list at least input and output");
  if (k != dims.back()) throw ValidationError("checkpoint: k does not match last dim");

  ModelSpec spec;
  spec.input_dim = dims.front();
  spec.hidden_dims.assign(dims.begin() + 1, dims.end() - 1);
  spec.num_classes = dims.back();
  spec.activation = activation_from_name(activation);
  spec.validate();

  Model model;
  model.spec = spec;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    model.weights.emplace_back(dims[l + 1], dims[l]);
    model.biases.emplace_back(dims[l + 1], 0.0);
  }

  auto read_tensor = [&](const std::string& name, double* dst, std::size_t count) {
    if (!std::getline(in, line)) throw ValidationError("checkpoint: missing tensor " + name);
    std::istringstream ts(line);
    std::string label;
    ts >> label;
    if (label != name) throw ValidationError("checkpoint: expected tensor " + name + ", found " + label);
    for (std::size_t i = 0; i < count; ++i) {
      if (!(ts >> dst[i]) || !std::isfinite(dst[i])) {
        throw ValidationError("checkpoint: tensor " + name + " truncated or non-finite");
      }
    }
    double extra;
    if (ts >> extra) throw ValidationError("checkpoint: tensor " + name + " has trailing values");
  };

  for (int l = 0; l < model.num_layers(); ++l) {
    read_tensor("W" + std::to_string(l), model.weights[l].data.data(), model.weights[l].data.size());
    read_tensor("b" + std::to_string(l), model.biases[l].data(), model.biases[l].size());
  }
  return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open checkpoint file for writing: " + path);
  write_checkpoint(model, out);
  if (!out) throw ValidationError("failed writing checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint file: " + path);
  return read_checkpoint(in);
}

}  // namespace oodlab::nn
