#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oodlab/matrix.hpp"
#include "oodlab/provenance.hpp"

namespace oodlab::data {

struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
  std::string name;

  int size() const { return features.rows; }
};

// Unlabeled traffic pool. Provenance tags are hidden from training except in
// oracle mode; mix_ratio is the fraction of in-distribution rows.
struct TrafficSet {
  Matrix features;
  std::vector<Provenance> provenance;
  double mix_ratio = 0.0;

  int size() const { return features.rows; }
};

struct MixSpec {
  double pi = 0.5;  // in-distribution fraction
  int size = 0;
  std::uint64_t seed = 0;
};

enum class OutKind { ring, uniform_box, shifted_blobs };

const char* out_kind_name(OutKind kind);
OutKind out_kind_from_name(const std::string& name);

struct OutParams {
  double ring_radius = 6.0;
  double ring_noise = 0.0;
  double box_half = 8.0;       // uniform_box support [-box_half, box_half]^2
  double shift = 6.0;          // shifted_blobs center offset along +x
  double blob_spread = 0.5;    // shifted_blobs isotropic std
  int blob_count = 3;
};

// K Gaussian blobs in 2D, centers at radius 2 on equally spaced angles,
// isotropic std = spread, labels by blob.
LabeledDataset gen_in_distribution(int num_classes, int n_per_class, double spread,
                                   std::uint64_t seed);

Matrix gen_out_distribution(OutKind kind, int n, const OutParams& params, std::uint64_t seed);

// Draw round(pi*M) in rows and the rest out rows without replacement, then
// shuffle. Tags record the true origin of every row.
TrafficSet mix_traffic(const Matrix& in_pool, const Matrix& out_pool, const MixSpec& spec);

struct SplitFractions {
  double train = 0.0;
  double holdout = 0.0;
  double test = 0.0;
};

struct Splits {
  LabeledDataset train;
  LabeledDataset holdout;
  LabeledDataset test;
};

// Deterministic shuffle-then-slice partition; disjoint and exhaustive.
Splits split(const LabeledDataset& dataset, const SplitFractions& fractions,
             std::uint64_t seed);

// Dataset file ("oodlab-data v1"). Labels are optional; traffic files reuse
// the labeled form with k=2 where the label is the provenance tag (0 = in,
// 1 = out).
struct DatasetFile {
  Matrix features;
  std::vector<int> labels;  // empty when unlabeled
  int num_classes = 0;      // 0 when unlabeled
};

void write_dataset(std::ostream& out, const Matrix& features,
                   const std::vector<int>& labels, int num_classes);
DatasetFile read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Matrix& features,
                  const std::vector<int>& labels, int num_classes);
DatasetFile load_dataset(const std::string& path);

void save_labeled(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_labeled(const std::string& path);
void save_traffic(const TrafficSet& traffic, const std::string& path);
TrafficSet load_traffic(const std::string& path);

}  // namespace oodlab::data
