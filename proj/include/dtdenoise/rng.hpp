// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "dtdenoise/errors.hpp"

namespace dtd {

/// Deterministic random source. All randomness in the toolkit flows through
/// explicit Rng instances so that runs are reproducible from their seed and
/// the engine state can be serialized exactly for checkpoint resume.
///
/// Draws are pure functions of the engine state (no cached spare values),
/// which keeps save/restore lossless.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (sine branch discarded).
  double normal() {
    double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  /// Uniform integer in [0, n).
  std::int64_t index(std::int64_t n) {
    if (n <= 0) throw ConfigError("Rng::index requires n > 0");
    unsigned __int128 wide = static_cast<unsigned __int128>(engine_()) * static_cast<std::uint64_t>(n);
    return static_cast<std::int64_t>(wide >> 64);
  }

  bool coin() { return (engine_() >> 63) != 0; }

  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void restore_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (is.fail()) throw FormatError("invalid rng state string");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dtd
