#pragma once

#include <cmath>

#include "tailseq/errors.hpp"

namespace tailseq {

namespace detail {
// sin(pi * a) for a in [0, 1], with the reflection done in exact arithmetic
// so the endpoints come out exactly 0 and the midpoint exactly 1.
inline double sin_pi(double a) {
  if (a > 0.5) a = 1.0 - a;
  return std::sin(M_PI * a);
}
}  // namespace detail

/// Sine-annealed loss coefficient: moves training emphasis from data-rich
/// head entities (large x) early on to data-poor ones (small x) late.
/// Returns sin(pi/2 * e/e_max + pi/2 * (x - l_min)/(l_max - l_min)), always
/// in [0, 1]. A degenerate range l_min == l_max maps the second term to 0.
inline double curriculum_weight(int e, int e_max, int x, int l_min, int l_max) {
  if (e_max < 1) throw ConfigError("curriculum_weight: e_max must be >= 1");
  if (e < 0 || e > e_max) throw ConfigError("curriculum_weight: epoch out of [0, e_max]");
  if (l_min > l_max) throw ConfigError("curriculum_weight: l_min > l_max");
  if (x < l_min || x > l_max)
    throw DataError("curriculum_weight: x = " + std::to_string(x) + " outside [" + std::to_string(l_min) + ", " +
                    std::to_string(l_max) + "]");
  const double epoch_term = static_cast<double>(e) / static_cast<double>(e_max);
  const double length_term =
      l_min == l_max ? 0.0 : static_cast<double>(x - l_min) / static_cast<double>(l_max - l_min);
  const double half_turns = 0.5 * epoch_term + 0.5 * length_term;
  return detail::sin_pi(half_turns);
}

}  // namespace tailseq
