#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace anisoflow {

struct VerifyOptions {
  std::uint64_t seed = 1;
  int instances = 20;                   // random configurations per property
  std::vector<int> polygon_sizes{8};    // vertex counts of the d = 1 instances
  std::optional<double> tolerance;      // replaces every property tolerance when set
};

struct PropertyResult {
  std::string name;
  double max_deviation = 0.0;  // largest relative deviation over all instances
  double tolerance = 0.0;
  bool passed = false;
};

struct VerificationReport {
  std::vector<PropertyResult> properties;

  bool passed() const;
  /// One line per property: name, max deviation, tolerance, PASS or FAIL.
  void write(std::ostream& out) const;
};

/// Central finite-difference checks of every derivative family of M and A
/// (curves and triangle meshes) and of grad L and Hess L (curves). Deviation
/// is max |analytic - fd| / max |fd| per instance.
VerificationReport run_verification(const VerifyOptions& options = {});

}  // namespace anisoflow
