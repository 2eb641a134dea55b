#ifndef GEOSAMPLER_CLI_HPP
#define GEOSAMPLER_CLI_HPP

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "geosampler/decoder.hpp"
#include "geosampler/density.hpp"
#include "geosampler/errors.hpp"
#include "geosampler/geodesics.hpp"
#include "geosampler/io.hpp"
#include "geosampler/metric.hpp"
#include "geosampler/sampling.hpp"

namespace geosampler::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kBadFlags = 2,
  kBadModel = 3,
  kIntegrationFailure = 4,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string model_path;
  std::uint64_t seed = 0;
  std::size_t n_steps = IntegratorConfig::kDefaultSteps;
};

struct SampleOptions {
  std::string output;
  double sigma = 0.01;
  std::string sigma_file;
  std::size_t chain_length = 1000;
  std::optional<std::size_t> burn_in;
  std::size_t thinning = 1;
  std::vector<double> z0;
  bool decode = false;
  std::size_t chains = 1;
};

struct ShootOptions {
  std::string output;
  std::vector<std::string> starts;
  std::vector<std::string> velocities;
  std::string shots_file;
};

struct BoxOptions {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> resolution;
};

struct FieldOptions {
  std::string output;
  BoxOptions box;
};

struct OracleOptions {
  double sigma = 0.01;
  std::string sigma_file;
  std::size_t chain_length = 50000;
  std::optional<std::size_t> burn_in;
  std::vector<double> z0;
  BoxOptions box;
  double threshold = 0.15;
  std::string grid_output;
  bool unconfined = false;
};

namespace detail {

inline std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": cannot parse '" + item + "' as a number");
    }
  }
  return values;
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Vector point_flag(const std::vector<double>& v, std::size_t dim, const std::string& flag) {
  if (v.size() != dim) {
    throw UsageError(flag + ": expected " + std::to_string(dim) + " values, got " +
                     std::to_string(v.size()));
  }
  return to_vector(v);
}

inline ModelBundle load_model(const std::string& path) {
  // Loader errors map to exit code 3 in run().
  return load_bundle(path);
}

inline SpdMatrix covariance_flag(double sigma, const std::string& file, std::size_t dim) {
  if (file.empty()) {
    if (!(sigma > 0.0)) throw UsageError("--sigma must be positive");
    return SpdMatrix::identity(dim, sigma);
  }
  std::ifstream in(file);
  if (!in) throw UsageError("--sigma-file: cannot open " + file);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    std::replace(token.begin(), token.end(), ',', ' ');
    std::stringstream ss(token);
    double x = 0.0;
    while (ss >> x) values.push_back(x);
    if (!ss.eof()) throw UsageError("--sigma-file: cannot parse '" + token + "'");
  }
  if (values.size() != dim * dim) {
    throw UsageError("--sigma-file: expected " + std::to_string(dim * dim) + " entries, got " +
                     std::to_string(values.size()));
  }
  Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * dim + c];
    }
  }
  try {
    return SpdMatrix(std::move(m));
  } catch (const NumericalError& e) {
    throw UsageError(std::string("--sigma-file: ") + e.what());
  }
}

inline CompactBox box_flags(const BoxOptions& opts, const MetricModel& model) {
  CompactBox box = default_box(model);
  if (!opts.lower.empty()) box.lower = point_flag(opts.lower, model.dim(), "--lower");
  if (!opts.upper.empty()) box.upper = point_flag(opts.upper, model.dim(), "--upper");
  try {
    box.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  return box;
}

inline std::vector<std::size_t> resolution_flag(const BoxOptions& opts, std::size_t dim,
                                                std::size_t fallback) {
  if (opts.resolution.empty()) return std::vector<std::size_t>(dim, fallback);
  if (opts.resolution.size() == 1) return std::vector<std::size_t>(dim, opts.resolution.front());
  if (opts.resolution.size() != dim) {
    throw UsageError("--resolution: give one count or one per axis (" + std::to_string(dim) + ")");
  }
  return opts.resolution;
}

inline std::size_t thread_cap() {
  if (const char* env = std::getenv("GEOSAMPLER_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n >= 1) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    throw UsageError("GEOSAMPLER_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline IntegratorConfig integrator_flags(const CommonOptions& common, bool record_path = false) {
  IntegratorConfig cfg;
  cfg.n_steps = common.n_steps;
  cfg.record_path = record_path;
  return cfg;
}

inline ChainConfig chain_flags(const CommonOptions& common, SpdMatrix covariance,
                               std::size_t chain_length, std::optional<std::size_t> burn_in,
                               std::size_t thinning, std::size_t dim) {
  ChainConfig cfg = ChainConfig::make(std::move(covariance), chain_length, common.seed);
  if (burn_in) cfg.burn_in = *burn_in;
  cfg.thinning = thinning;
  cfg.integrator = integrator_flags(common);
  try {
    cfg.validate(dim);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

}  // namespace detail

inline int cmd_sample(const CommonOptions& common, const SampleOptions& opts, std::ostream& err) {
  const ModelBundle bundle = detail::load_model(common.model_path);
  const MetricModel& model = bundle.metric;
  if (opts.decode && !bundle.decoder) throw UsageError("--decode: model file has no decoder");
  if (opts.chains < 1) throw UsageError("--chains must be at least 1");

  const ChainConfig cfg = detail::chain_flags(
      common, detail::covariance_flag(opts.sigma, opts.sigma_file, model.dim()), opts.chain_length,
      opts.burn_in, opts.thinning, model.dim());
  const Vector z0 =
      opts.z0.empty() ? default_start(model) : detail::point_flag(opts.z0, model.dim(), "--z0");

  const auto started = std::chrono::steady_clock::now();
  const std::vector<ChainResult> results =
      run_chains(model, z0, cfg, opts.chains, detail::thread_cap());

  std::vector<std::vector<Vector>> decoded;
  if (opts.decode) {
    for (const auto& r : results) decoded.push_back(decode_batch(*bundle.decoder, r.samples));
  }
  write_to_file(opts.output, [&](std::ostream& out) {
    write_samples_csv(out, results, decoded, opts.chains > 1);
  });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::size_t accepted = 0, proposed = 0;
  for (const auto& r : results) {
    accepted += r.accepted_total;
    proposed += r.proposals_total;
  }
  err << "acceptance_rate " << static_cast<double>(accepted) / static_cast<double>(proposed)
      << "\nwall_time_s " << seconds << '\n';
  return kOk;
}

inline int cmd_shoot(const CommonOptions& common, const ShootOptions& opts, std::ostream& err) {
  const ModelBundle bundle = detail::load_model(common.model_path);
  const MetricModel& model = bundle.metric;
  const std::size_t d = model.dim();

  std::vector<std::pair<Vector, Vector>> shots;
  if (!opts.shots_file.empty()) {
    CsvTable table;
    try {
      table = read_csv_file(opts.shots_file);
    } catch (const ParseError& e) {
      throw UsageError(std::string("--shots-file: ") + e.what());
    }
    if (table.header.size() != 2 * d) {
      throw UsageError("--shots-file: expected " + std::to_string(2 * d) +
                       " columns (z_0.., v_0..)");
    }
    for (const auto& row : table.rows) {
      const Vector all = detail::to_vector(row);
      shots.emplace_back(all.head(static_cast<Eigen::Index>(d)),
                         all.tail(static_cast<Eigen::Index>(d)));
    }
  }
  if (opts.starts.size() != opts.velocities.size()) {
    throw UsageError("--start and --velocity must be given the same number of times");
  }
  for (std::size_t i = 0; i < opts.starts.size(); ++i) {
    shots.emplace_back(detail::point_flag(detail::parse_list(opts.starts[i], "--start"), d, "--start"),
                       detail::point_flag(detail::parse_list(opts.velocities[i], "--velocity"), d,
                                          "--velocity"));
  }
  if (shots.empty()) throw UsageError("no shots given (use --start/--velocity or --shots-file)");

  const IntegratorConfig cfg = detail::integrator_flags(common, true);
  std::vector<GeodesicPath> paths;
  for (const auto& [z0, v] : shots) paths.push_back(exp_map(model, z0, v, cfg));

  write_to_file(opts.output, [&](std::ostream& out) {
    out << "shot,step";
    for (std::size_t k = 0; k < d; ++k) out << ",z_" << k;
    out << '\n';
    for (std::size_t s = 0; s < paths.size(); ++s) {
      for (std::size_t t = 0; t < paths[s].points.size(); ++t) {
        out << s << ',' << t;
        for (Eigen::Index k = 0; k < paths[s].points[t].size(); ++k) {
          out << ',' << format_double(paths[s].points[t](k));
        }
        out << '\n';
      }
    }
  });
  err << "shots " << paths.size() << '\n';
  return kOk;
}

inline int cmd_field(const CommonOptions& common, const FieldOptions& opts, std::ostream& err) {
  const ModelBundle bundle = detail::load_model(common.model_path);
  const MetricModel& model = bundle.metric;
  if (model.dim() != 2) {
    throw UsageError("field export needs a 2-dimensional latent space (model has dim " +
                     std::to_string(model.dim()) + ")");
  }
  const CompactBox box = detail::box_flags(opts.box, model);
  const auto res = detail::resolution_flag(opts.box, 2, 100);
  if (res[0] == 0 || res[1] == 0) throw UsageError("--resolution must be positive");

  write_to_file(opts.output, [&](std::ostream& out) {
    out << "z_0,z_1,log_volume\n";
    const double w0 = (box.upper(0) - box.lower(0)) / static_cast<double>(res[0]);
    const double w1 = (box.upper(1) - box.lower(1)) / static_cast<double>(res[1]);
    Vector z(2);
    for (std::size_t i = 0; i < res[0]; ++i) {
      for (std::size_t j = 0; j < res[1]; ++j) {
        z << box.lower(0) + (static_cast<double>(i) + 0.5) * w0,
            box.lower(1) + (static_cast<double>(j) + 0.5) * w1;
        out << format_double(z(0)) << ',' << format_double(z(1)) << ','
            << format_double(log_volume_element(model, z)) << '\n';
      }
    }
  });
  err << "cells " << res[0] * res[1] << '\n';
  return kOk;
}

inline int cmd_oracle_check(const CommonOptions& common, const OracleOptions& opts,
                            std::ostream& out) {
  const ModelBundle bundle = detail::load_model(common.model_path);
  const MetricModel& model = bundle.metric;
  if (model.dim() > DensityGrid::kMaxDim) {
    throw UsageError("oracle-check supports latent dimension <= 3");
  }
  const CompactBox box = detail::box_flags(opts.box, model);
  const auto res = detail::resolution_flag(opts.box, model.dim(), 50);

  std::optional<DensityGrid> grid;
  try {
    grid = build_density_grid(model, box, res);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  ChainConfig cfg = detail::chain_flags(
      common, detail::covariance_flag(opts.sigma, opts.sigma_file, model.dim()), opts.chain_length,
      opts.burn_in, 1, model.dim());
  if (!opts.unconfined) cfg.support = box;
  const Vector z0 =
      opts.z0.empty() ? default_start(model) : detail::point_flag(opts.z0, model.dim(), "--z0");
  if (cfg.support && !box.contains(z0)) throw UsageError("--z0 lies outside the box");

  const ChainResult result = riemannian_random_walk(model, z0, cfg);
  const double tv = tv_distance(*grid, result.samples);
  if (!opts.grid_output.empty()) export_grid_csv(*grid, opts.grid_output);

  out << "tv_distance " << format_double(tv) << '\n'
      << "acceptance_rate " << format_double(result.acceptance_rate) << '\n'
      << "log_normalizer " << format_double(grid->log_normalizer()) << '\n'
      << "threshold " << format_double(opts.threshold) << '\n'
      << (tv <= opts.threshold ? "PASS" : "FAIL") << '\n';
  return tv <= opts.threshold ? kOk : kCheckFailed;
}

inline int cmd_validate(const CommonOptions& common, std::ostream& out) {
  const ModelBundle bundle = detail::load_model(common.model_path);
  out << "ok: dim " << bundle.metric.dim() << ", centroids " << bundle.metric.num_centroids()
      << ", decoder "
      << (bundle.decoder ? std::to_string(bundle.decoder->output_dim()) + " outputs" : "none")
      << '\n';
  return kOk;
}

/// Parses `args` (program name first) and dispatches. Never throws.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometry-aware latent space sampler"};
  app.require_subcommand(1);

  CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-m,--model", common.model_path, "Model bundle (JSON, version 1)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_option("--n-steps", common.n_steps, "RK2 steps per geodesic")
        ->check(CLI::PositiveNumber);
  };
  auto add_box = [](CLI::App* sub, BoxOptions& box) {
    sub->add_option("--lower", box.lower, "Box lower corner")->delimiter(',');
    sub->add_option("--upper", box.upper, "Box upper corner")->delimiter(',');
    sub->add_option("--resolution", box.resolution, "Cells per axis (one or per-axis)")
        ->delimiter(',');
  };

  SampleOptions sample;
  auto* sample_cmd = app.add_subcommand("sample", "Run the Riemannian random walk");
  add_common(sample_cmd);
  sample_cmd->add_option("-o,--output", sample.output, "Samples CSV")->required();
  auto* sigma_opt = sample_cmd->add_option("--sigma", sample.sigma, "Isotropic covariance scale s (Sigma = s I)");
  sample_cmd->add_option("--sigma-file", sample.sigma_file, "Covariance matrix file")
      ->excludes(sigma_opt);
  sample_cmd->add_option("--chain-length", sample.chain_length)->check(CLI::PositiveNumber);
  sample_cmd->add_option("--burn-in", sample.burn_in, "Default: 10% of chain length");
  sample_cmd->add_option("--thinning", sample.thinning)->check(CLI::PositiveNumber);
  sample_cmd->add_option("--z0", sample.z0, "Start point")->delimiter(',');
  sample_cmd->add_flag("--decode", sample.decode, "Append decoder outputs");
  sample_cmd->add_option("--chains", sample.chains, "Independent chains (seed, seed+1, ...)")
      ->check(CLI::PositiveNumber);

  ShootOptions shoot;
  auto* shoot_cmd = app.add_subcommand("shoot", "Export geodesic traces");
  add_common(shoot_cmd);
  shoot_cmd->add_option("-o,--output", shoot.output, "Trace CSV")->required();
  shoot_cmd->add_option("--start", shoot.starts, "Start point, comma separated (repeatable)");
  shoot_cmd->add_option("--velocity", shoot.velocities, "Initial velocity (repeatable)");
  shoot_cmd->add_option("--shots-file", shoot.shots_file, "CSV with z_0..,v_0.. columns");

  FieldOptions field;
  auto* field_cmd = app.add_subcommand("field", "Export the log volume element on a 2D grid");
  add_common(field_cmd);
  field_cmd->add_option("-o,--output", field.output, "Field CSV")->required();
  add_box(field_cmd, field.box);

  OracleOptions oracle;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "Chain-vs-quadrature TV test");
  add_common(oracle_cmd);
  auto* osigma = oracle_cmd->add_option("--sigma", oracle.sigma);
  oracle_cmd->add_option("--sigma-file", oracle.sigma_file)->excludes(osigma);
  oracle_cmd->add_option("--chain-length", oracle.chain_length)->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--burn-in", oracle.burn_in);
  oracle_cmd->add_option("--z0", oracle.z0)->delimiter(',');
  add_box(oracle_cmd, oracle.box);
  oracle_cmd->add_option("--threshold", oracle.threshold, "Pass if TV <= threshold");
  oracle_cmd->add_option("--grid-output", oracle.grid_output, "Also export the density grid CSV");
  oracle_cmd->add_flag("--unconfined", oracle.unconfined,
                       "Do not reject proposals leaving the box");

  auto* validate_cmd = app.add_subcommand("validate", "Load and validate a model bundle");
  add_common(validate_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kBadFlags;
  }

  try {
    if (*sample_cmd) return cmd_sample(common, sample, err);
    if (*shoot_cmd) return cmd_shoot(common, shoot, err);
    if (*field_cmd) return cmd_field(common, field, err);
    if (*oracle_cmd) return cmd_oracle_check(common, oracle, out);
    if (*validate_cmd) return cmd_validate(common, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kBadFlags;
  } catch (const ParseError& e) {
    err << "invalid model file: " << e.what() << '\n';
    return kBadModel;
  } catch (const ValidationError& e) {
    err << "invalid model file: " << e.what() << '\n';
    return kBadModel;
  } catch (const IntegrationError& e) {
    err << "integration failure: " << e.what() << '\n';
    return kIntegrationFailure;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kIntegrationFailure;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kBadFlags;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kBadFlags;
  }
  return kBadFlags;
}

}  // namespace geosampler::cli

#endif  // GEOSAMPLER_CLI_HPP
