#include "ldcp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ldcp/rng.hpp"

namespace ldcp {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits one CSV line, honoring double quotes around fields.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

int category_index(const ColumnSpec& col, const std::string& value) {
  for (std::size_t i = 0; i < col.categories.size(); ++i) {
    if (col.categories[i] == value) return static_cast<int>(i);
  }
  throw std::runtime_error("unknown category '" + value + "' in column '" + col.name + "'");
}

double parse_number(const ColumnSpec& col, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("non-numeric value '" + value + "' in continuous column '" +
                             col.name + "'");
  }
}

std::string schema_fingerprint(const FeatureSchema& schema) {
  std::string text;
  for (const auto& col : schema.columns) {
    text += col.name;
    text += static_cast<char>('0' + static_cast<int>(col.kind));
    text += std::to_string(col.min) + "," + std::to_string(col.max);
    for (const auto& c : col.categories) text += c + "|";
    text += ";";
  }
  text += schema.label_name + "=" + schema.label_positive;
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

int FeatureSchema::encoded_dim() const {
  int d = 0;
  for (const auto& col : columns) {
    d += col.kind == ColumnSpec::Kind::Categorical ? 2 : 1;
  }
  return d;
}

void FeatureSchema::validate() const {
  if (columns.empty()) throw std::invalid_argument("schema: no feature columns");
  if (label_name.empty()) throw std::invalid_argument("schema: missing label column name");
  for (const auto& col : columns) {
    if (col.name.empty()) throw std::invalid_argument("schema: unnamed column");
    switch (col.kind) {
      case ColumnSpec::Kind::Continuous:
        if (!(col.min < col.max))
          throw std::invalid_argument("schema: column '" + col.name + "' needs min < max");
        break;
      case ColumnSpec::Kind::Categorical:
        if (col.categories.size() < 2)
          throw std::invalid_argument("schema: column '" + col.name + "' needs >= 2 categories");
        break;
      case ColumnSpec::Kind::Binary:
        if (col.categories.size() != 2)
          throw std::invalid_argument("schema: column '" + col.name +
                                      "' needs exactly 2 categories");
        break;
    }
  }
}

LooView::LooView(const EncodedDataset& d, std::size_t omit) : base(&d), omitted_index(omit) {
  if (omit >= d.size()) throw std::invalid_argument("loo view: omitted index out of range");
}

std::pair<double, double> encode_categorical(int i, int m) {
  if (m < 2) throw std::invalid_argument("encode_categorical: need >= 2 categories");
  if (i < 0 || i >= m) throw std::invalid_argument("encode_categorical: index out of range");
  const double t = kPi / 2.0 * static_cast<double>(i) / static_cast<double>(m - 1);
  // cos(pi/2) rounds to a tiny negative; inputs must stay in [0,1].
  return {std::clamp(std::cos(t), 0.0, 1.0), std::clamp(std::sin(t), 0.0, 1.0)};
}

std::vector<double> encode_record(const std::vector<std::string>& cells,
                                  const FeatureSchema& schema, int* label) {
  if (cells.size() != schema.columns.size() + 1) {
    throw std::runtime_error("record has " + std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(schema.columns.size() + 1));
  }
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(schema.encoded_dim()));
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const ColumnSpec& col = schema.columns[c];
    const std::string& cell = cells[c];
    switch (col.kind) {
      case ColumnSpec::Kind::Continuous: {
        const double v = parse_number(col, cell);
        const double scaled = (v - col.min) / (col.max - col.min);
        x.push_back(std::clamp(scaled, 0.0, 1.0));
        break;
      }
      case ColumnSpec::Kind::Categorical: {
        const int i = category_index(col, cell);
        const auto [cs, sn] = encode_categorical(i, static_cast<int>(col.categories.size()));
        x.push_back(cs);
        x.push_back(sn);
        break;
      }
      case ColumnSpec::Kind::Binary: {
        const int i = category_index(col, cell);
        x.push_back(i == 0 ? 0.0 : 1.0);
        break;
      }
    }
  }
  *label = cells.back() == schema.label_positive ? +1 : -1;
  return x;
}

EncodedDataset load_csv(const std::string& path, const FeatureSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);

  // Column order in the file may differ from the schema; build a permutation.
  std::vector<std::size_t> cell_order;  // schema columns then label
  std::vector<std::string> wanted;
  for (const auto& col : schema.columns) wanted.push_back(col.name);
  wanted.push_back(schema.label_name);
  if (header.size() != wanted.size()) {
    throw std::runtime_error(path + ": header has " + std::to_string(header.size()) +
                             " columns, schema declares " + std::to_string(wanted.size()));
  }
  for (const auto& name : wanted) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error(path + ": header is missing column '" + name + "'");
    cell_order.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  EncodedDataset data;
  data.source = path;
  data.schema_hash = schema_fingerprint(schema);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> raw = split_csv_line(line);
    if (raw.size() != header.size()) {
      throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                               std::to_string(raw.size()) + " cells, expected " +
                               std::to_string(header.size()));
    }
    std::vector<std::string> cells;
    cells.reserve(raw.size());
    for (const std::size_t idx : cell_order) cells.push_back(raw[idx]);
    int label = 0;
    try {
      data.inputs.push_back(encode_record(cells, schema, &label));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": row " + std::to_string(row) + ": " + e.what());
    }
    data.labels.push_back(label);
  }
  if (data.inputs.empty()) throw std::runtime_error(path + ": no records");
  return data;
}

EncodedDataset synth_dataset(std::size_t n, int d, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("synth_dataset: need n >= 2");
  if (d < 1) throw std::invalid_argument("synth_dataset: need d >= 1");

  Rng rng(seed);
  std::vector<double> normal(static_cast<std::size_t>(d));
  double norm2 = 0.0;
  for (auto& a : normal) {
    a = rng.uniform(-1.0, 1.0);
    norm2 += a * a;
  }
  if (norm2 == 0.0) {
    normal[0] = 1.0;
    norm2 = 1.0;
  }
  const double scale = 1.0 / std::sqrt(norm2);
  for (auto& a : normal) a *= scale;

  const double margin = 0.03;
  auto projection = [&](const std::vector<double>& x) {
    double p = 0.0;
    for (int j = 0; j < d; ++j) p += normal[static_cast<std::size_t>(j)] * (x[static_cast<std::size_t>(j)] - 0.5);
    return p;
  };

  EncodedDataset data;
  data.source = "synthetic(n=" + std::to_string(n) + ",d=" + std::to_string(d) +
                ",seed=" + std::to_string(seed) + ")";

  // Two anchors on opposite sides of the hyperplane guarantee both labels.
  double amax = 0.0;
  for (const double a : normal) amax = std::max(amax, std::abs(a));
  const double step = 0.4 / amax;
  for (const int sign : {+1, -1}) {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      x[static_cast<std::size_t>(j)] =
          std::clamp(0.5 + sign * step * normal[static_cast<std::size_t>(j)], 0.0, 1.0);
    }
    data.inputs.push_back(x);
    data.labels.push_back(projection(x) >= 0.0 ? +1 : -1);
  }

  while (data.inputs.size() < n) {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (auto& v : x) v = rng.uniform01();
    const double p = projection(x);
    if (std::abs(p) < margin) continue;  // keep a separating band empty
    data.inputs.push_back(std::move(x));
    data.labels.push_back(p >= 0.0 ? +1 : -1);
  }
  return data;
}

}  // namespace ldcp
