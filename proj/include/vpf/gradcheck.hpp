#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vpf/autodiff.hpp"

namespace vpf {

struct GradCheckOptions {
  double step = 1e-6;
  /// Individual entries probed per parameter besides the random direction.
  int spot_entries = 16;
  uint64_t seed = 7;
  /// Multiple of the difference quotient's rounding resolution,
  /// eps * |L| / step, that is forgiven before the relative error is taken.
  double roundoff_ulps = 16.0;
};

struct GradCheckEntry {
  std::string name;
  double directional_error = 0.0;
  double max_entry_error = 0.0;
  double error() const { return directional_error > max_entry_error ? directional_error : max_entry_error; }
};

/// Compares backward() against central differences of `loss` for each
/// named parameter. Parameters must be 64-bit leaves. Errors are relative:
/// max(0, |fd - analytic| - noise) / max(|fd|, |analytic|), where noise is the
/// rounding resolution of the central difference.
std::vector<GradCheckEntry> gradcheck(const std::function<Var()>& loss,
                                      const std::vector<std::pair<std::string, Var>>& params,
                                      const GradCheckOptions& opt = {});

/// Largest error() over all entries.
double max_gradcheck_error(const std::vector<GradCheckEntry>& entries);

}  // namespace vpf
