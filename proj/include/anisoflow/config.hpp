#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anisoflow/analysis.hpp"

namespace anisoflow {

struct AnisotropySpec {
  AnisotropyKind kind = AnisotropyKind::Isotropic;
  std::vector<double> params;  // semi-axes for elliptic, eps for the regularized norms

  /// Throws InvalidConfig for unknown kinds, wrong parameter counts or values.
  AnisotropyModel build() const;
};

struct InitialCurveSpec {
  enum class Source { Wulff, Mesh };
  Source source = Source::Wulff;
  std::optional<AnisotropySpec> shape;  // Wulff shape to sample; defaults to the flow anisotropy
  double radius = 1.0;
  int vertices = 64;
  WulffSampling sampling = WulffSampling::NormalAngle;
  std::filesystem::path mesh;
};

struct StudySettings {
  int n_min = 4;
  int n_max = 8;
  double target_time = 0.0;
  double h0_scale = 0.0;  // 0: perimeter of the initial Wulff shape
};

/// Everything a run or a convergence study needs. Built from a flat
/// `key = value` file; see README.md for the grammar and the key list.
struct RunConfig {
  AnisotropySpec anisotropy;
  InitialCurveSpec initial;
  StepLaw tau{StepLaw::Kind::Quadratic, 1.0};
  StepLaw tau_tilde{StepLaw::Kind::Quadratic, 1.0};
  std::optional<double> h0;  // defaults to the mesh size of the initial curve
  double lambda = 0.0;
  int steps = 0;
  std::vector<int> snapshots{0};
  SolverConfig solver;  // step parameters and step count are derived
  StudySettings study;
  std::uint64_t seed = 1;

  /// Throws InvalidConfig on inconsistent values (for example a snapshot index past the step count).
  void validate() const;

  /// Canonical key/value list; parse_config_entries(entries()) reproduces the config.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

/// Parses and validates `key = value` lines. `#` starts a comment, blank lines
/// are ignored, unknown or repeated keys are errors. Relative mesh paths are
/// resolved against `base`.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base = {});
RunConfig parse_config_entries(const std::vector<std::pair<std::string, std::string>>& entries,
                               const std::filesystem::path& base = {});

/// Reads a config file. A `.json` file is read as a run summary and its
/// "config" object is used, so a run can be repeated from its own output.
RunConfig load_config(const std::filesystem::path& path);

void write_config(std::ostream& out, const RunConfig& config);

/// The initial curve described by the config.
SimplicialSurface initial_curve(const RunConfig& config);

/// Step parameters of a run: tau and tau~ evaluated at h0 (explicit or the initial mesh size).
StepParameters run_step_parameters(const RunConfig& config, const SimplicialSurface& initial);

ConvergenceSpec convergence_spec(const RunConfig& config);

}  // namespace anisoflow
