#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ldcp {

/// Declared encoding for one CSV column.
///
/// Continuous columns map to one feature (v - min) / (max - min), clamped
/// to [0,1]. Categorical columns map to two features on the unit-circle
/// arc. Binary columns map to a single 0/1 feature.
struct ColumnSpec {
  enum class Kind { Continuous, Categorical, Binary };
  Kind kind = Kind::Continuous;
  std::string name;
  double min = 0.0;                     // continuous
  double max = 1.0;                     // continuous
  std::vector<std::string> categories;  // categorical (>=2) / binary (==2)
};

struct FeatureSchema {
  std::vector<ColumnSpec> columns;
  std::string label_name;
  std::string label_positive;

  /// Encoded input dimension (continuous 1, categorical 2, binary 1).
  int encoded_dim() const;
  void validate() const;
};

/// A dataset already encoded to inputs in [0,1]^d and labels in {-1,+1}.
struct EncodedDataset {
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
  std::string source;
  std::string schema_hash;

  std::size_t size() const { return inputs.size(); }
  int dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs[0].size()); }
};

/// Read-only view of a dataset with exactly one entry omitted.
struct LooView {
  const EncodedDataset* base = nullptr;
  std::size_t omitted_index = 0;

  LooView(const EncodedDataset& d, std::size_t omit);
  std::size_t size() const { return base->size() - 1; }
  /// Maps view position i in [0, size()) to an index into the base dataset.
  std::size_t base_index(std::size_t i) const { return i < omitted_index ? i : i + 1; }
};

/// Two-feature arc encoding of category i out of m:
/// (cos(pi/2 * i/(m-1)), sin(pi/2 * i/(m-1))).
std::pair<double, double> encode_categorical(int i, int m);

/// Encodes one record (raw cell strings, schema order, label cell last
/// position given by the schema's label column). Returns the input vector;
/// label written to *label.
std::vector<double> encode_record(const std::vector<std::string>& cells,
                                  const FeatureSchema& schema, int* label);

/// Loads a CSV file with a header row. The header must contain every schema
/// column plus the label column; extra columns are rejected. Malformed rows
/// abort with the 1-based data row number.
EncodedDataset load_csv(const std::string& path, const FeatureSchema& schema);

/// Deterministic synthetic dataset: n points in [0,1]^d labelled by a seeded
/// hyperplane through the box center, with a margin band kept empty so the
/// classes are linearly separable. Both labels always occur.
EncodedDataset synth_dataset(std::size_t n, int d, std::uint64_t seed);

}  // namespace ldcp
