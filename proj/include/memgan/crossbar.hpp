#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "memgan/device.hpp"
#include "memgan/error.hpp"
#include "memgan/matrix.hpp"
#include "memgan/random.hpp"

namespace memgan {

enum class ReadoutMode {
  ideal,   // exact signed dot product of the array's weights
  loaded,  // column voltage across a load memristor (voltage divider)
};

/// One layer's weights held as memristor conductances.
///
/// Rows are inputs, columns are outputs. Each cell stores a conductance
/// magnitude in [1/r_off, 1/r_on] and a sign realized by inverting the row
/// input. Weights map affinely: |w| = 0 -> G_off, |w| = w_max -> G_on.
///
/// Device-to-device variability is a fixed per-cell deviation: the array is
/// programmed to on-grid targets (g_mag) and reads back
/// sample_variability(g_mag, model, cell index).
class CrossbarArray {
 public:
  CrossbarArray() = default;

  /// All cells at G_off (zero weight), sign +1.
  CrossbarArray(const DeviceSpec& spec, std::size_t rows, std::size_t cols, double w_max,
                bool quantized = false, VariabilityModel variability = {},
                std::optional<double> g_load = std::nullopt)
      : spec_(spec),
        rows_(rows),
        cols_(cols),
        w_max_(w_max),
        g_load_(g_load.value_or(spec.g_on())),
        quantized_(quantized),
        variability_(variability),
        g_mag_(rows * cols, spec.g_off()),
        sign_(rows * cols, 1) {
    validate(spec_);
    if (!(w_max_ > 0.0) || !std::isfinite(w_max_))
      throw Error(ErrorCategory::config, "crossbar: w_max must be positive and finite");
    if (!(g_load_ > 0.0)) throw Error(ErrorCategory::config, "crossbar: load conductance must be positive");
    refresh();
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t cell_count() const noexcept { return rows_ * cols_; }
  const DeviceSpec& spec() const noexcept { return spec_; }
  double w_max() const noexcept { return w_max_; }
  double g_load() const noexcept { return g_load_; }
  bool quantized() const noexcept { return quantized_; }
  const VariabilityModel& variability() const noexcept { return variability_; }

  /// Programmed conductance magnitude.
  double g_mag(std::size_t r, std::size_t c) const noexcept { return g_mag_[r * cols_ + c]; }
  int sign(std::size_t r, std::size_t c) const noexcept { return sign_[r * cols_ + c]; }
  /// Conductance seen by a read, including device variability.
  double g_read(std::size_t r, std::size_t c) const noexcept { return g_read_[r * cols_ + c]; }

  const std::vector<double>& g_mag_data() const noexcept { return g_mag_; }
  const std::vector<std::int8_t>& sign_data() const noexcept { return sign_; }

  /// Signed weight a conductance stands for.
  double weight_of(double g, int sign) const noexcept {
    return sign * (g - spec_.g_off()) / spec_.g_span() * w_max_;
  }

  /// Programmed weight of a cell (inverse of the write mapping).
  double weight(std::size_t r, std::size_t c) const noexcept { return weight_of(g_mag(r, c), sign(r, c)); }

  /// Programmed weights as a matrix.
  Matrix weights() const {
    Matrix w(rows_, cols_);
    for (std::size_t i = 0; i < g_mag_.size(); ++i) w.data()[i] = weight_of(g_mag_[i], sign_[i]);
    return w;
  }

  /// Row-major signed weights realized by a read (variability included).
  const std::vector<double>& effective_weights() const noexcept { return w_eff_; }
  /// Per-column sum of read conductances.
  const std::vector<double>& column_conductance() const noexcept { return col_g_; }

  /// Conductance a write of weight w programs (before variability).
  double target_conductance(double w) const noexcept {
    const double g = spec_.g_off() + std::abs(w) / w_max_ * spec_.g_span();
    return quantized_ ? quantize(g, spec_) : clamp_conductance(g, spec_);
  }

  /// Writes every cell with the weights of w. Requires exclusive access.
  void program(const Matrix& w) {
    if (w.rows() != rows_ || w.cols() != cols_)
      throw Error(ErrorCategory::shape, "crossbar: program with mismatched weight matrix");
    for (std::size_t i = 0; i < g_mag_.size(); ++i) {
      const double v = w.data()[i];
      if (!std::isfinite(v)) throw Error(ErrorCategory::numeric, "training diverged: non-finite weight");
      g_mag_[i] = target_conductance(v);
      sign_[i] = v < 0.0 ? -1 : 1;
    }
    refresh();
  }

  /// Adds delta to the programmed weights, rewriting only the cells whose
  /// delta is nonzero. Returns the number of cells written.
  std::size_t apply_delta(const Matrix& delta) {
    if (delta.rows() != rows_ || delta.cols() != cols_)
      throw Error(ErrorCategory::shape, "crossbar: update with mismatched delta matrix");
    std::size_t written = 0;
    for (std::size_t i = 0; i < g_mag_.size(); ++i) {
      const double d = delta.data()[i];
      if (d == 0.0) continue;
      const double v = weight_of(g_mag_[i], sign_[i]) + d;
      if (!std::isfinite(v)) throw Error(ErrorCategory::numeric, "training diverged: non-finite weight");
      g_mag_[i] = target_conductance(v);
      sign_[i] = v < 0.0 ? -1 : 1;
      ++written;
    }
    if (written) refresh();
    return written;
  }

  /// Restores raw cell contents (checkpoint loading).
  void set_cells(std::vector<double> g_mag, std::vector<std::int8_t> sign) {
    if (g_mag.size() != cell_count() || sign.size() != cell_count())
      throw Error(ErrorCategory::shape, "crossbar: cell data size mismatch");
    for (std::size_t i = 0; i < g_mag.size(); ++i) {
      if (!(g_mag[i] >= spec_.g_off() && g_mag[i] <= spec_.g_on()))
        throw Error(ErrorCategory::format, "crossbar: conductance outside device range");
      if (sign[i] != 1 && sign[i] != -1) throw Error(ErrorCategory::format, "crossbar: sign must be +1 or -1");
    }
    g_mag_ = std::move(g_mag);
    sign_ = std::move(sign);
    refresh();
  }

  void set_variability(const VariabilityModel& model) {
    variability_ = model;
    refresh();
  }

 private:
  void refresh() {
    g_read_.resize(g_mag_.size());
    w_eff_.resize(g_mag_.size());
    col_g_.assign(cols_, 0.0);
    for (std::size_t i = 0; i < g_mag_.size(); ++i) {
      g_read_[i] = sample_variability(g_mag_[i], variability_, spec_, i);
      w_eff_[i] = weight_of(g_read_[i], sign_[i]);
    }
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) col_g_[c] += g_read_[r * cols_ + c];
  }

  DeviceSpec spec_{};
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double w_max_ = 1.0;
  double g_load_ = 0.0;
  bool quantized_ = false;
  VariabilityModel variability_{};
  std::vector<double> g_mag_;
  std::vector<std::int8_t> sign_;
  std::vector<double> g_read_;
  std::vector<double> w_eff_;
  std::vector<double> col_g_;
};

/// Maps a signed weight matrix onto a fresh crossbar. Without an explicit
/// scale, w_max = max |w|; an all-zero matrix then has no scale.
inline CrossbarArray map_weights(const Matrix& w, const DeviceSpec& spec, bool quantized,
                                 std::optional<double> w_max = std::nullopt) {
  double scale = 0.0;
  if (w_max) {
    scale = *w_max;
  } else {
    for (double v : w.data()) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) throw Error(ErrorCategory::config, "degenerate weight scale");
  }
  CrossbarArray xbar(spec, w.rows(), w.cols(), scale, quantized);
  xbar.program(w);
  return xbar;
}

/// Residual noise on nominally idle rows: every input that is exactly zero
/// is replaced by a draw from Uniform(0, noise_level * v_write).
struct LeakageNoise {
  double noise_level = 0.0;
  Stream* rng = nullptr;

  bool active() const noexcept { return noise_level > 0.0 && rng != nullptr; }
};

/// Reads all columns for input voltages v_in into `out` (length = cols).
inline void read_into(const CrossbarArray& xbar, std::span<const double> v_in, std::span<double> out,
                      ReadoutMode mode, LeakageNoise leak = {}) {
  const std::size_t rows = xbar.rows(), cols = xbar.cols();
  if (v_in.size() != rows) throw Error(ErrorCategory::shape, "crossbar read: input length != row count");
  if (out.size() != cols) throw Error(ErrorCategory::shape, "crossbar read: output length != column count");

  std::vector<double> noisy;
  if (leak.active()) {
    noisy.assign(v_in.begin(), v_in.end());
    const double hi = leak.noise_level * xbar.spec().v_write;
    for (double& v : noisy)
      if (v == 0.0) v = leak.rng->uniform(0.0, hi);
    v_in = noisy;
  }

  std::fill(out.begin(), out.end(), 0.0);
  if (mode == ReadoutMode::ideal) {
    const auto& w = xbar.effective_weights();
    for (std::size_t i = 0; i < rows; ++i) {
      const double v = v_in[i];
      if (v == 0.0) continue;
      const double* wr = w.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) out[j] += wr[j] * v;
    }
    return;
  }

  // Loaded: column current into a load memristor; the sign switch drives the
  // row with -v where the stored sign is negative.
  for (std::size_t i = 0; i < rows; ++i) {
    const double v = v_in[i];
    if (v == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) out[j] += xbar.g_read(i, j) * xbar.sign(i, j) * v;
  }
  const auto& col_g = xbar.column_conductance();
  for (std::size_t j = 0; j < cols; ++j) out[j] /= xbar.g_load() + col_g[j];
}

inline std::vector<double> read(const CrossbarArray& xbar, std::span<const double> v_in, ReadoutMode mode,
                                LeakageNoise leak = {}) {
  std::vector<double> out(xbar.cols());
  read_into(xbar, v_in, out, mode, leak);
  return out;
}

struct LeakageReport {
  std::vector<double> per_column;  // amperes
  double total = 0.0;              // amperes
};

/// Sneak current with every row nominally idle: row i carries a residual
/// voltage eps_i ~ Uniform(0, noise_level * v_write) and column j collects
/// sum_i g_ij * eps_i.
inline LeakageReport leakage_current(const CrossbarArray& xbar, double noise_level, Stream& rng) {
  if (!(noise_level >= 0.0)) throw Error(ErrorCategory::config, "leakage: noise level must be non-negative");
  LeakageReport report;
  report.per_column.assign(xbar.cols(), 0.0);
  if (noise_level == 0.0) return report;
  const double hi = noise_level * xbar.spec().v_write;
  for (std::size_t i = 0; i < xbar.rows(); ++i) {
    const double eps = rng.uniform(0.0, hi);
    for (std::size_t j = 0; j < xbar.cols(); ++j) report.per_column[j] += xbar.g_read(i, j) * eps;
  }
  for (double c : report.per_column) report.total += c;
  return report;
}

}  // namespace memgan
