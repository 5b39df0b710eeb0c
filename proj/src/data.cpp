#include "oodlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "oodlab/errors.hpp"
#include "oodlab/rng.hpp"

namespace oodlab::data {

const char* out_kind_name(OutKind kind) {
  switch (kind) {
    case OutKind::ring: return "ring";
    case OutKind::uniform_box: return "uniform_box";
    case OutKind::shifted_blobs: return "shifted_blobs";
  }
  return "?";
}

OutKind out_kind_from_name(const std::string& name) {
  if (name == "ring") return OutKind::ring;
  if (name == "uniform_box") return OutKind::uniform_box;
  if (name == "shifted_blobs") return OutKind::shifted_blobs;
  throw ValidationError("unknown out-distribution kind: " + name);
}

LabeledDataset gen_in_distribution(int num_classes, int n_per_class, double spread,
                                   std::uint64_t seed) {
  if (num_classes < 2) throw ValidationError("gen_in_distribution requires K >= 2");
  if (n_per_class < 1) throw ValidationError("gen_in_distribution requires n_per_class >= 1");
  if (!(spread > 0.0)) throw ValidationError("gen_in_distribution requires spread > 0");

  const int n = num_classes * n_per_class;
  LabeledDataset ds;
  ds.features = Matrix(n, 2);
  ds.labels.resize(n);
  ds.num_classes = num_classes;
  ds.name = "blobs-k" + std::to_string(num_classes);

  std::mt19937_64 rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  constexpr double kCenterRadius = 2.0;
  int row = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * c / num_classes;
    const double cx = kCenterRadius * std::cos(angle);
    const double cy = kCenterRadius * std::sin(angle);
    for (int i = 0; i < n_per_class; ++i, ++row) {
      ds.features(row, 0) = cx + noise(rng);
      ds.features(row, 1) = cy + noise(rng);
      ds.labels[row] = c;
    }
  }
  return ds;
}

Matrix gen_out_distribution(OutKind kind, int n, const OutParams& params, std::uint64_t seed) {
  if (n < 1) throw ValidationError("gen_out_distribution requires n >= 1");
  Matrix features(n, 2);
  std::mt19937_64 rng = make_rng(seed);
  switch (kind) {
    case OutKind::ring: {
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      std::normal_distribution<double> radial(0.0, params.ring_noise > 0.0 ? params.ring_noise : 1.0);
      for (int i = 0; i < n; ++i) {
        const double a = angle(rng);
        const double r = params.ring_radius +
                         (params.ring_noise > 0.0 ? radial(rng) : 0.0);
        features(i, 0) = r * std::cos(a);
        features(i, 1) = r * std::sin(a);
      }
      break;
    }
    case OutKind::uniform_box: {
      std::uniform_real_distribution<double> coord(-params.box_half, params.box_half);
      for (int i = 0; i < n; ++i) {
        features(i, 0) = coord(rng);
        features(i, 1) = coord(rng);
      }
      break;
    }
    case OutKind::shifted_blobs: {
      std::normal_distribution<double> noise(0.0, params.blob_spread);
      std::uniform_int_distribution<int> pick(0, std::max(1, params.blob_count) - 1);
      for (int i = 0; i < n; ++i) {
        const int c = pick(rng);
        const double angle = 2.0 * std::numbers::pi * c / std::max(1, params.blob_count);
        features(i, 0) = params.shift + 2.0 * std::cos(angle) + noise(rng);
        features(i, 1) = params.shift + 2.0 * std::sin(angle) + noise(rng);
      }
      break;
    }
  }
  return features;
}

TrafficSet mix_traffic(const Matrix& in_pool, const Matrix& out_pool, const MixSpec& spec) {
  if (!(spec.pi >= 0.0 && spec.pi <= 1.0)) throw ValidationError("mix ratio must lie in [0, 1]");
  if (spec.size < 1) throw ValidationError("traffic size must be >= 1");
  if (in_pool.cols != out_pool.cols && in_pool.rows > 0 && out_pool.rows > 0) {
    throw ValidationError("in and out pools must share feature width");
  }
  const int n_in = static_cast<int>(std::llround(spec.pi * spec.size));
  const int n_out = spec.size - n_in;
  if (n_in > in_pool.rows) {
    throw ValidationError("in pool too small: need " + std::to_string(n_in) + " rows, have " +
                          std::to_string(in_pool.rows));
  }
  if (n_out > out_pool.rows) {
    throw ValidationError("out pool too small: need " + std::to_string(n_out) + " rows, have " +
                          std::to_string(out_pool.rows));
  }

  std::mt19937_64 rng = make_rng(spec.seed);
  auto sample_rows = [&rng](const Matrix& pool, int count) {
    std::vector<int> order(pool.rows);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(count);
    return order;
  };
  const std::vector<int> in_rows = sample_rows(in_pool, n_in);
  const std::vector<int> out_rows = sample_rows(out_pool, n_out);

  const int d = n_in > 0 ? in_pool.cols : out_pool.cols;
  TrafficSet traffic;
  traffic.features = Matrix(spec.size, d);
  traffic.provenance.resize(spec.size);
  traffic.mix_ratio = spec.pi;

  std::vector<int> placement(spec.size);
  std::iota(placement.begin(), placement.end(), 0);
  std::shuffle(placement.begin(), placement.end(), rng);

  for (int i = 0; i < spec.size; ++i) {
    const int dst = placement[i];
    const bool from_in = i < n_in;
    const Matrix& pool = from_in ? in_pool : out_pool;
    const int src = from_in ? in_rows[i] : out_rows[i - n_in];
    for (int c = 0; c < d; ++c) traffic.features(dst, c) = pool(src, c);
    traffic.provenance[dst] = from_in ? Provenance::in_dist : Provenance::out_dist;
  }
  return traffic;
}

Splits split(const LabeledDataset& dataset, const SplitFractions& fractions,
             std::uint64_t seed) {
  const double sum = fractions.train + fractions.holdout + fractions.test;
  if (!(fractions.train > 0.0 && fractions.holdout > 0.0 && fractions.test > 0.0)) {
    throw ValidationError("split fractions must all be positive");
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
  const int n = dataset.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  int n_train = static_cast<int>(std::llround(fractions.train * n));
  int n_holdout = static_cast<int>(std::llround(fractions.holdout * n));
  n_train = std::clamp(n_train, 0, n);
  n_holdout = std::clamp(n_holdout, 0, n - n_train);

  auto take = [&](int begin, int count, const std::string& suffix) {
    LabeledDataset part;
    part.features = Matrix(count, dataset.features.cols);
    part.labels.resize(count);
    part.num_classes = dataset.num_classes;
    part.name = dataset.name + suffix;
    for (int i = 0; i < count; ++i) {
      const int src = order[begin + i];
      for (int c = 0; c < dataset.features.cols; ++c) {
        part.features(i, c) = dataset.features(src, c);
      }
      part.labels[i] = dataset.labels[src];
    }
    return part;
  };

  Splits splits;
  splits.train = take(0, n_train, "/train");
  splits.holdout = take(n_train, n_holdout, "/holdout");
  splits.test = take(n_train + n_holdout, n - n_train - n_holdout, "/test");
  return splits;
}

namespace {

void write_value(std::ostream& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void write_dataset(std::ostream& out, const Matrix& features,
                   const std::vector<int>& labels, int num_classes) {
  const bool labeled = !labels.empty();
  if (labeled && static_cast<int>(labels.size()) != features.rows) {
    throw ValidationError("dataset write: label count does not match rows");
  }
  out << "oodlab-data v1 d=" << features.cols << " labeled=" << (labeled ? 1 : 0)
      << " k=" << (labeled ? num_classes : 0) << "\n";
  for (int i = 0; i < features.rows; ++i) {
    if (labeled) out << labels[i] << ',';
    for (int c = 0; c < features.cols; ++c) {
      if (c) out << ',';
      write_value(out, features(i, c));
    }
    out << '\n';
  }
}

DatasetFile read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("dataset: empty file");
  std::istringstream header(line);
  std::string magic, version;
  header >> magic >> version;
  if (magic != "oodlab-data" || version != "v1") {
    throw ValidationError("dataset: missing 'oodlab-data v1' header");
  }
  int d = -1, labeled = -1, k = -1;
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ValidationError("dataset: malformed header field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const int value = std::stoi(field.substr(eq + 1));
    if (key == "d") d = value;
    else if (key == "labeled") labeled = value;
    else if (key == "k") k = value;
    else throw ValidationError("dataset: unknown header field '" + key + "'");
  }
  if (d < 1 || labeled < 0 || labeled > 1 || k < 0) {
    throw ValidationError("dataset: invalid header values");
  }
  if (labeled == 1 && k < 2) throw ValidationError("dataset: labeled file requires k >= 2");

  std::vector<double> values;
  std::vector<int> labels;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    int col = 0;
    const int expect = d + labeled;
    while (std::getline(ls, tok, ',')) {
      if (col >= expect) throw ValidationError("dataset: too many columns on row " + std::to_string(rows));
      if (labeled == 1 && col == 0) {
        const int y = std::stoi(tok);
        if (y < 0 || y >= k) throw ValidationError("dataset: label outside [0, k) on row " + std::to_string(rows));
        labels.push_back(y);
      } else {
        const double v = std::stod(tok);
        if (!std::isfinite(v)) throw ValidationError("dataset: non-finite feature on row " + std::to_string(rows));
        values.push_back(v);
      }
      ++col;
    }
    if (col != expect) throw ValidationError("dataset: short row " + std::to_string(rows));
    ++rows;
  }

  DatasetFile file;
  file.features = Matrix(rows, d);
  file.features.data = std::move(values);
  file.labels = std::move(labels);
  file.num_classes = labeled == 1 ? k : 0;
  return file;
}

void save_dataset(const std::string& path, const Matrix& features,
                  const std::vector<int>& labels, int num_classes) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open dataset file for writing: " + path);
  write_dataset(out, features, labels, num_classes);
  if (!out) throw ValidationError("failed writing dataset: " + path);
}

DatasetFile load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file: " + path);
  return read_dataset(in);
}

void save_labeled(const LabeledDataset& ds, const std::string& path) {
  save_dataset(path, ds.features, ds.labels, ds.num_classes);
}

LabeledDataset load_labeled(const std::string& path) {
  DatasetFile file = load_dataset(path);
  if (file.labels.empty()) throw ValidationError("expected a labeled dataset: " + path);
  LabeledDataset ds;
  ds.features = std::move(file.features);
  ds.labels = std::move(file.labels);
  ds.num_classes = file.num_classes;
  ds.name = path;
  return ds;
}

void save_traffic(const TrafficSet& traffic, const std::string& path) {
  std::vector<int> tags(traffic.provenance.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    tags[i] = traffic.provenance[i] == Provenance::out_dist ? 1 : 0;
  }
  save_dataset(path, traffic.features, tags, 2);
}

TrafficSet load_traffic(const std::string& path) {
  DatasetFile file = load_dataset(path);
  if (file.labels.empty() || file.num_classes != 2) {
    throw ValidationError("traffic file must be labeled with k=2 provenance tags: " + path);
  }
  TrafficSet traffic;
  traffic.features = std::move(file.features);
  traffic.provenance.resize(file.labels.size());
  int in_count = 0;
  for (std::size_t i = 0; i < file.labels.size(); ++i) {
    traffic.provenance[i] = file.labels[i] == 1 ? Provenance::out_dist : Provenance::in_dist;
    in_count += file.labels[i] == 0 ? 1 : 0;
  }
  traffic.mix_ratio = traffic.provenance.empty()
                          ? 0.0
                          : static_cast<double>(in_count) / traffic.provenance.size();
  return traffic;
}

}  // namespace oodlab::data
