#ifndef GEOSAMPLER_IO_HPP
#define GEOSAMPLER_IO_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "geosampler/decoder.hpp"
#include "geosampler/density.hpp"
#include "geosampler/errors.hpp"
#include "geosampler/metric.hpp"
#include "geosampler/sampling.hpp"

namespace geosampler {

/// Version-1 model file: the metric, an optional decoder and free-form
/// string metadata, stored as one JSON document. Matrices are nested
/// row-major arrays; decoder parameters are 32-bit floats.
struct ModelBundle {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  MetricModel metric;
  std::optional<DecoderModel> decoder;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) throw IoError("cannot format number");
  return std::string(buf, end);
}

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ValidationError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(path + "." + key, "missing");
  return *it;
}

inline double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ValidationError(path, "non-finite number");
  return x;
}

inline std::size_t read_count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ValidationError(path, "expected a nonnegative integer");
  }
  return j.get<std::size_t>();
}

inline Vector read_vector(const json& j, const std::string& path, bool as_float32 = false) {
  if (!j.is_array()) throw ValidationError(path, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string item = path + "[" + std::to_string(i) + "]";
    double x = read_number(j[i], item);
    if (as_float32) {
      x = static_cast<double>(static_cast<float>(x));
      if (!std::isfinite(x)) throw ValidationError(item, "out of 32-bit float range");
    }
    v(static_cast<Eigen::Index>(i)) = x;
  }
  return v;
}

inline Matrix read_matrix(const json& j, const std::string& path, bool as_float32 = false) {
  if (!j.is_array() || j.empty()) throw ValidationError(path, "expected a non-empty array of rows");
  Matrix m;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    Vector row = read_vector(j[r], row_path, as_float32);
    if (r == 0) {
      m.resize(static_cast<Eigen::Index>(j.size()), row.size());
    } else if (row.size() != m.cols()) {
      throw ValidationError(row_path, "ragged matrix row");
    }
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

inline json write_vector(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline json write_matrix(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(write_vector(m.row(r).transpose()));
  return out;
}

// Re-scopes a model-level ValidationError under a bundle path prefix.
template <typename F>
auto with_prefix(const std::string& prefix, F&& build) {
  try {
    return build();
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + "." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
  }
}

inline MetricModel parse_metric(const json& j) {
  const std::string path = "metric";
  const std::size_t dim = read_count(require(j, "dim", path), path + ".dim");
  const double temperature = read_number(require(j, "temperature", path), path + ".temperature");
  const double regularization =
      read_number(require(j, "regularization", path), path + ".regularization");
  const json& cj = require(j, "centroids", path);
  const json& fj = require(j, "factors", path);
  if (!cj.is_array()) throw ValidationError(path + ".centroids", "expected an array");
  if (!fj.is_array()) throw ValidationError(path + ".factors", "expected an array");
  std::vector<Vector> centroids;
  for (std::size_t i = 0; i < cj.size(); ++i) {
    centroids.push_back(read_vector(cj[i], path + ".centroids[" + std::to_string(i) + "]"));
  }
  std::vector<Matrix> factors;
  for (std::size_t i = 0; i < fj.size(); ++i) {
    factors.push_back(read_matrix(fj[i], path + ".factors[" + std::to_string(i) + "]"));
  }
  return with_prefix(path, [&] {
    return MetricModel(dim, std::move(centroids), std::move(factors), temperature, regularization);
  });
}

inline DecoderModel parse_decoder(const json& j) {
  const std::string path = "decoder";
  const json& lj = require(j, "layers", path);
  if (!lj.is_array()) throw ValidationError(path + ".layers", "expected an array");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < lj.size(); ++i) {
    const std::string lp = path + ".layers[" + std::to_string(i) + "]";
    DenseLayer layer;
    layer.weight = read_matrix(require(lj[i], "weight", lp), lp + ".weight", true);
    layer.bias = read_vector(require(lj[i], "bias", lp), lp + ".bias", true);
    const json& aj = require(lj[i], "activation", lp);
    auto act = aj.is_string() ? parse_activation(aj.get<std::string>()) : std::nullopt;
    if (!act) throw ValidationError(lp + ".activation", "expected one of relu, sigmoid, linear");
    layer.activation = *act;
    layers.push_back(std::move(layer));
  }
  std::optional<std::pair<std::size_t, std::size_t>> shape;
  if (auto it = j.find("output_shape"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2) {
      throw ValidationError(path + ".output_shape", "expected [height, width]");
    }
    shape = std::make_pair(read_count((*it)[0], path + ".output_shape[0]"),
                           read_count((*it)[1], path + ".output_shape[1]"));
  }
  // DecoderModel already reports fields as "decoder.*".
  return DecoderModel(std::move(layers), shape);
}

}  // namespace detail

inline ModelBundle parse_bundle(const nlohmann::json& root) {
  using detail::require;
  if (!root.is_object()) throw ParseError("bundle: top level must be a JSON object");
  const auto& vj = require(root, "format_version", "bundle");
  if (!vj.is_number_integer()) throw ValidationError("format_version", "expected an integer");
  const int version = vj.get<int>();
  if (version != ModelBundle::kFormatVersion) {
    throw ValidationError("format_version", "unsupported version " + std::to_string(version) +
                                                " (expected " +
                                                std::to_string(ModelBundle::kFormatVersion) + ")");
  }
  MetricModel metric = detail::parse_metric(require(root, "metric", "bundle"));
  std::optional<DecoderModel> decoder;
  if (auto it = root.find("decoder"); it != root.end() && !it->is_null()) {
    decoder = detail::parse_decoder(*it);
    if (decoder->input_dim() != metric.dim()) {
      throw ValidationError("decoder.layers[0].weight",
                            "input width " + std::to_string(decoder->input_dim()) +
                                " does not match metric.dim " + std::to_string(metric.dim()));
    }
  }
  std::map<std::string, std::string> metadata;
  if (auto it = root.find("metadata"); it != root.end() && !it->is_null()) {
    if (!it->is_object()) throw ValidationError("metadata", "expected an object of strings");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_string()) throw ValidationError("metadata." + key, "expected a string");
      metadata.emplace(key, value.get<std::string>());
    }
  }
  return ModelBundle{version, std::move(metric), std::move(decoder), std::move(metadata)};
}

inline nlohmann::json bundle_to_json(const ModelBundle& bundle) {
  using nlohmann::json;
  json metric = {
      {"dim", bundle.metric.dim()},
      {"temperature", bundle.metric.temperature()},
      {"regularization", bundle.metric.regularization()},
      {"centroids", json::array()},
      {"factors", json::array()},
  };
  for (const auto& c : bundle.metric.centroids()) metric["centroids"].push_back(detail::write_vector(c));
  for (const auto& f : bundle.metric.factors()) metric["factors"].push_back(detail::write_matrix(f));

  json root = {{"format_version", bundle.format_version},
               {"metadata", bundle.metadata},
               {"metric", std::move(metric)}};
  if (bundle.decoder) {
    json layers = json::array();
    for (const auto& layer : bundle.decoder->layers()) {
      layers.push_back({{"weight", detail::write_matrix(layer.weight)},
                        {"bias", detail::write_vector(layer.bias)},
                        {"activation", std::string(to_string(layer.activation))}});
    }
    json dec = {{"layers", std::move(layers)}};
    if (const auto& shape = bundle.decoder->output_shape()) {
      dec["output_shape"] = {shape->first, shape->second};
    }
    root["decoder"] = std::move(dec);
  }
  return root;
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open bundle file " + path.string());
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed bundle " + path.string() + ": " + e.what());
  }
  return parse_bundle(root);
}

inline void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << bundle_to_json(bundle).dump(1) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// CSV outputs

/// Rows: [chain_id,] step_index, z_0..z_{d-1}, log_volume, accepted_flag,
/// then x_0..x_{D-1} when decoded rows are given. `decoded`, when non-empty,
/// holds one row list per chain aligned with that chain's samples.
inline void write_samples_csv(std::ostream& out, std::span<const ChainResult> chains,
                              std::span<const std::vector<Vector>> decoded, bool tag_chain) {
  if (chains.empty()) throw IoError("no chain results to write");
  if (!decoded.empty() && decoded.size() != chains.size()) {
    throw IoError("decoded rows must be given for every chain");
  }
  const Eigen::Index d = chains.front().samples.empty() ? 0 : chains.front().samples.front().size();
  Eigen::Index width = 0;
  if (!decoded.empty() && !decoded.front().empty()) width = decoded.front().front().size();

  if (tag_chain) out << "chain_id,";
  out << "step_index";
  for (Eigen::Index k = 0; k < d; ++k) out << ",z_" << k;
  out << ",log_volume,accepted_flag";
  for (Eigen::Index k = 0; k < width; ++k) out << ",x_" << k;
  out << '\n';

  for (std::size_t c = 0; c < chains.size(); ++c) {
    const ChainResult& r = chains[c];
    if (!decoded.empty() && decoded[c].size() != r.samples.size()) {
      throw IoError("decoded row count does not match sample count");
    }
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      if (tag_chain) out << c << ',';
      out << r.sample_steps[i];
      for (Eigen::Index k = 0; k < r.samples[i].size(); ++k) out << ',' << format_double(r.samples[i](k));
      out << ',' << format_double(r.log_volume_trace[r.sample_steps[i] - 1]) << ','
          << static_cast<int>(r.sample_accepted[i]);
      if (!decoded.empty()) {
        for (Eigen::Index k = 0; k < decoded[c][i].size(); ++k) {
          out << ',' << format_double(decoded[c][i](k));
        }
      }
      out << '\n';
    }
  }
}

inline void write_to_file(const std::filesystem::path& path, const auto& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  writer(out);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

inline void export_samples_csv(const ChainResult& result, const std::vector<Vector>* decoded,
                               const std::filesystem::path& path) {
  write_to_file(path, [&](std::ostream& out) {
    std::span<const std::vector<Vector>> rows;
    if (decoded != nullptr) rows = std::span<const std::vector<Vector>>(decoded, 1);
    write_samples_csv(out, std::span<const ChainResult>(&result, 1), rows, false);
  });
}

/// Rows: z_0..z_{d-1} (cell centre), density (normalized).
inline void write_grid_csv(std::ostream& out, const DensityGrid& grid) {
  for (std::size_t k = 0; k < grid.dim(); ++k) out << "z_" << k << ',';
  out << "density\n";
  for (std::size_t i = 0; i < grid.num_cells(); ++i) {
    const Vector c = grid.cell_center(i);
    for (Eigen::Index k = 0; k < c.size(); ++k) out << format_double(c(k)) << ',';
    out << format_double(grid.density(i)) << '\n';
  }
}

inline void export_grid_csv(const DensityGrid& grid, const std::filesystem::path& path) {
  write_to_file(path, [&](std::ostream& out) { write_grid_csv(out, grid); });
}

/// Numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(p, comma, x);
      if (ec != std::errc{} || ptr != comma) throw ParseError("bad CSV number: " + line);
      row.push_back(x);
      p = comma + 1;
    }
    if (row.size() != table.header.size()) throw ParseError("CSV row width mismatch: " + line);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_csv(in);
}

}  // namespace geosampler

#endif  // GEOSAMPLER_IO_HPP
