#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "memgan/error.hpp"
#include "memgan/random.hpp"

namespace memgan {

/// Electrical parameters of one memristor type.
struct DeviceSpec {
  double r_on = 4.0e3;         // ohms, low-resistance state
  double r_off = 25.0e3;       // ohms, high-resistance state
  double v_threshold = 0.8;    // volts
  double v_write = 1.0;        // volts
  double t_write = 10.0e-9;    // seconds per write pulse
  std::size_t n_levels = 128;  // stable conductance levels

  double g_on() const noexcept { return 1.0 / r_on; }
  double g_off() const noexcept { return 1.0 / r_off; }
  double g_span() const noexcept { return g_on() - g_off(); }
  /// Conductance distance between adjacent levels.
  double level_gap() const noexcept {
    return g_span() / static_cast<double>(n_levels - 1);
  }

  bool operator==(const DeviceSpec&) const = default;
};

/// WO2 device used for the write-time/power budgets.
inline DeviceSpec wo2_device() { return DeviceSpec{}; }

inline void validate(const DeviceSpec& spec) {
  if (!(spec.r_on > 0.0) || !(spec.r_off > spec.r_on))
    throw Error(ErrorCategory::config, "device: require 0 < r_on < r_off");
  if (!(spec.v_write > spec.v_threshold))
    throw Error(ErrorCategory::config, "device: write voltage must exceed the threshold");
  if (!(spec.t_write > 0.0))
    throw Error(ErrorCategory::config, "device: t_write must be positive");
  if (spec.n_levels < 2)
    throw Error(ErrorCategory::config, "device: n_levels must be at least 2");
}

enum class VariabilityDistribution { multiplicative_gaussian };

/// Device-to-device spread of programmed conductance.
struct VariabilityModel {
  double sigma_pct = 0.0;  // fractional standard deviation, 0 = ideal
  VariabilityDistribution distribution = VariabilityDistribution::multiplicative_gaussian;
  std::uint64_t seed = 0;

  bool ideal() const noexcept { return sigma_pct == 0.0; }
  bool operator==(const VariabilityModel&) const = default;
};

namespace detail {

// Value of grid level k; both endpoints are exact reciprocals of the
// resistance bounds.
inline double level_value(const DeviceSpec& spec, std::size_t k) {
  if (k + 1 >= spec.n_levels) return spec.g_on();
  return spec.g_off() + static_cast<double>(k) * spec.level_gap();
}

}  // namespace detail

/// The programmable conductance grid, uniform in conductance, ascending.
inline std::vector<double> conductance_levels(const DeviceSpec& spec) {
  validate(spec);
  std::vector<double> levels(spec.n_levels);
  for (std::size_t k = 0; k < spec.n_levels; ++k) levels[k] = detail::level_value(spec, k);
  return levels;
}

inline double clamp_conductance(double g, const DeviceSpec& spec) {
  return std::clamp(g, spec.g_off(), spec.g_on());
}

/// Index of the grid level nearest to g (ties toward the higher level).
inline std::size_t level_index(double g, const DeviceSpec& spec) {
  const double x = (clamp_conductance(g, spec) - spec.g_off()) / spec.level_gap();
  const auto k = static_cast<std::size_t>(std::floor(x + 0.5));
  return std::min(k, spec.n_levels - 1);
}

/// Nearest programmable conductance. Out-of-range values clamp to the
/// nearest endpoint; exact midpoints round toward the higher conductance.
inline double quantize(double g, const DeviceSpec& spec) {
  return detail::level_value(spec, level_index(g, spec));
}

/// g * (1 + eps), eps ~ N(0, sigma_pct), clipped to the device range.
/// `draw_index` selects the draw within the model's seeded stream, so the
/// same (seed, index) always yields the same deviation.
inline double sample_variability(double g, const VariabilityModel& model, const DeviceSpec& spec,
                                 std::uint64_t draw_index) {
  if (model.ideal()) return g;
  const Stream stream(model.seed);
  const double eps = model.sigma_pct * stream.normal_at(draw_index);
  return clamp_conductance(g * (1.0 + eps), spec);
}

/// Power drawn while writing a device held at conductance g.
inline double write_power(const DeviceSpec& spec, double g) {
  return spec.v_write * spec.v_write * g;
}

}  // namespace memgan
