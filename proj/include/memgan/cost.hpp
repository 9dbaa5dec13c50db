#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "memgan/device.hpp"
#include "memgan/error.hpp"
#include "memgan/topology.hpp"

namespace memgan {

/// How weight writes are spread over write pulses.
enum class UpdateScheme {
  net_parallel_layer_seq,           // both nets in parallel, layers in sequence
  column_parallel_layer_parallel,   // independent columns and layers in parallel
  four_cycle_layer_series,          // 4 cycles per layer (rows and columns)
  two_cycle_layer_series,           // 2 cycles per layer
};

inline constexpr std::array<UpdateScheme, 4> kAllSchemes = {
    UpdateScheme::net_parallel_layer_seq, UpdateScheme::column_parallel_layer_parallel,
    UpdateScheme::four_cycle_layer_series, UpdateScheme::two_cycle_layer_series};

inline const char* to_string(UpdateScheme s) {
  switch (s) {
    case UpdateScheme::net_parallel_layer_seq: return "net-parallel-layer-seq";
    case UpdateScheme::column_parallel_layer_parallel: return "column-parallel-layer-parallel";
    case UpdateScheme::four_cycle_layer_series: return "four-cycle-layer-series";
    case UpdateScheme::two_cycle_layer_series: return "two-cycle-layer-series";
  }
  return "?";
}

/// Simultaneous writes of the network-parallel scheme.
inline constexpr std::uint64_t kNetParallelWrites = 6;

/// Size figures of a generator + discriminator pair that the schedule
/// depends on.
struct TopologyStats {
  std::uint64_t weights = 0;       // W: total crossbar cells
  std::uint64_t layers = 0;        // L: crossbar layers across both nets
  std::uint64_t max_columns = 0;   // C_max: widest crossbar

  bool operator==(const TopologyStats&) const = default;
};

inline TopologyStats topology_stats(const GanTopology& t) {
  return {t.generator.weight_count() + t.discriminator.weight_count(),
          t.generator.crossbar_layers() + t.discriminator.crossbar_layers(),
          std::max(t.generator.max_columns(), t.discriminator.max_columns())};
}

struct ScheduleConfig {
  UpdateScheme scheme = UpdateScheme::two_cycle_layer_series;
  DeviceSpec device{};
  TopologyStats topology{};
};

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

/// Write pulses needed to update every weight once.
inline std::uint64_t steps_per_event(const ScheduleConfig& c) {
  const auto& t = c.topology;
  if (t.weights == 0 || t.layers == 0 || t.max_columns == 0)
    throw Error(ErrorCategory::config, "schedule: empty topology");
  switch (c.scheme) {
    case UpdateScheme::two_cycle_layer_series: return 2 * t.layers;
    case UpdateScheme::four_cycle_layer_series: return 4 * t.layers;
    case UpdateScheme::column_parallel_layer_parallel: return t.max_columns;
    case UpdateScheme::net_parallel_layer_seq: return ceil_div(t.weights, kNetParallelWrites);
  }
  return 0;
}

inline constexpr std::array<double, 3> kWriteTimes = {10e-9, 100e-9, 1000e-9};

struct ScheduleReport {
  UpdateScheme scheme{};
  std::uint64_t events = 0;
  std::uint64_t steps_per_event = 0;
  std::uint64_t parallel_writes_per_step = 0;
  double t_write = 0.0;             // seconds, from the device
  double training_time = 0.0;       // seconds at t_write
  std::array<double, 3> training_time_variants{};  // at 10 / 100 / 1000 ns
  double power_max = 0.0;           // watts, every write at R_on
  double power_min = 0.0;           // watts, every write at R_off
};

inline ScheduleReport schedule_report(const ScheduleConfig& c, std::uint64_t epochs, std::uint64_t images) {
  validate(c.device);
  ScheduleReport r;
  r.scheme = c.scheme;
  r.events = epochs * images;
  r.steps_per_event = steps_per_event(c);
  r.parallel_writes_per_step = ceil_div(c.topology.weights, r.steps_per_event);
  const auto time_at = [&](double t_write) {
    return static_cast<double>(r.events) * static_cast<double>(r.steps_per_event) * t_write;
  };
  r.t_write = c.device.t_write;
  r.training_time = time_at(c.device.t_write);
  for (std::size_t i = 0; i < kWriteTimes.size(); ++i) r.training_time_variants[i] = time_at(kWriteTimes[i]);
  const auto writes = static_cast<double>(r.parallel_writes_per_step);
  r.power_max = writes * write_power(c.device, c.device.g_on());
  r.power_min = writes * write_power(c.device, c.device.g_off());
  return r;
}

/// Published budget figures for the 1.7M-weight, 3M-event setting, used as
/// comparison columns in cost reports.
struct ReferenceRow {
  UpdateScheme scheme;
  double power_max;
  double power_min;
  std::array<double, 3> time;
  bool reproducible;  // false: no counting model matches both time and power
};

inline constexpr std::array<ReferenceRow, 4> kReferenceRows = {{
    {UpdateScheme::net_parallel_layer_seq, 0.00150, 0.00024, {19e5, 19e6, 19e7}, false},
    {UpdateScheme::column_parallel_layer_parallel, 0.48800, 0.07808, {23.552, 235.52, 2355.20}, true},
    {UpdateScheme::four_cycle_layer_series, 17.2, 2.8, {0.72, 7.20, 72.0}, true},
    {UpdateScheme::two_cycle_layer_series, 35.4, 5.6, {0.36, 3.60, 36.0}, true},
}};

inline const ReferenceRow& reference_row(UpdateScheme s) {
  for (const auto& r : kReferenceRows)
    if (r.scheme == s) return r;
  throw Error(ErrorCategory::config, "no reference row");
}

enum class CmosComponent { dropout_switch, opamp, thresholding, relu, crossbar_switch };

inline constexpr std::array<CmosComponent, 5> kAllComponents = {
    CmosComponent::dropout_switch, CmosComponent::opamp, CmosComponent::thresholding, CmosComponent::relu,
    CmosComponent::crossbar_switch};

inline const char* to_string(CmosComponent c) {
  switch (c) {
    case CmosComponent::dropout_switch: return "dropout_switch";
    case CmosComponent::opamp: return "opamp";
    case CmosComponent::thresholding: return "thresholding";
    case CmosComponent::relu: return "relu";
    case CmosComponent::crossbar_switch: return "crossbar_switch";
  }
  return "?";
}

struct ComponentCost {
  double power_mw = 0.0;
  double area_um2 = 0.0;
};

/// Power (mW) and area (um^2) per CMOS component in 0.18 um.
struct CmosCostTable {
  std::array<ComponentCost, 5> entries = {{
      {0.0033, 14.5},   // dropout switch
      {7.4000, 558.3},  // opamp
      {0.0586, 0.8},    // thresholding circuit
      {23.300, 951.1},  // ReLU
      {5.0000, 5.0},    // crossbar switch
  }};

  ComponentCost& operator[](CmosComponent c) { return entries[static_cast<std::size_t>(c)]; }
  const ComponentCost& operator[](CmosComponent c) const { return entries[static_cast<std::size_t>(c)]; }
};

inline void validate(const CmosCostTable& t) {
  for (const auto& e : t.entries)
    if (!(e.power_mw > 0.0) || !(e.area_um2 > 0.0))
      throw Error(ErrorCategory::config, "cmos: every component cost must be positive");
}

/// Component counts in kAllComponents order.
using CmosCounts = std::array<std::uint64_t, 5>;

struct CmosTotals {
  double power_mw = 0.0;
  double area_um2 = 0.0;

  double power_w() const { return power_mw * 1e-3; }
  double area_mm2() const { return area_um2 * 1e-6; }
};

inline CmosTotals cmos_cost(const CmosCounts& counts, const CmosCostTable& table = {}) {
  validate(table);
  double mw = 0.0, um2 = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    mw += static_cast<double>(counts[i]) * table.entries[i].power_mw;
    um2 += static_cast<double>(counts[i]) * table.entries[i].area_um2;
  }
  return {mw, um2};
}

}  // namespace memgan
