#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "memgan/gan.hpp"
#include "memgan/image_io.hpp"
#include "memgan/quality.hpp"

namespace memgan {

inline constexpr std::size_t kGallerySize = 10;

/// One row of an experiment's metrics table.
struct MetricsRecord {
  std::string run_id;
  std::size_t epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double quality = 0.0;
  double variability = 0.0;
  std::size_t n_levels = 0;
  std::uint64_t update_events = 0;
  std::optional<double> wall_seconds;  // left out of files unless requested
};

/// Shortest round-trip text for a double.
inline std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  double back = 0.0;
  for (int p = 6; p <= 17; ++p) {
    std::ostringstream t;
    t << std::setprecision(p) << v;
    std::istringstream(t.str()) >> back;
    if (back == v) return t.str();
  }
  return s.str();
}

/// CSV with a single header row; the wall_seconds column appears only when
/// `with_timing` is set, so default outputs are reproducible byte for byte.
inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records,
                              bool with_timing = false) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << "run_id,epoch,d_loss,g_loss,quality_metric,variability,n_levels,update_events";
  if (with_timing) out << ",wall_seconds";
  out << "\n";
  for (const auto& r : records) {
    out << r.run_id << ',' << r.epoch << ',' << format_number(r.d_loss) << ',' << format_number(r.g_loss) << ','
        << format_number(r.quality) << ',' << format_number(r.variability) << ',' << r.n_levels << ','
        << r.update_events;
    if (with_timing) out << ',' << format_number(r.wall_seconds.value_or(0.0));
    out << "\n";
  }
  if (!out) throw Error(ErrorCategory::io, "failed writing " + path.string());
}

/// Everything an experiment needs besides its swept axis.
struct ExperimentContext {
  GanTopology topology;
  DeviceSpec device;
  TrainConfig train;
  std::vector<Tensor> dataset;  // values in [-1, 1]
  std::size_t metric_samples = 1000;
  std::uint64_t sample_seed = 7;

  double v_scale() const { return image_scale(topology); }
};

/// Re-programs a trained state's accumulated weights onto arrays of another
/// device / analog configuration. Network shapes and scales are kept.
inline TrainState deploy(const TrainState& trained, const DeviceSpec& device, const TrainConfig& config) {
  validate(device);
  const auto rebuild = [&](const Network& net, const WeightAccumulator& weights) {
    std::vector<double> scales;
    for (const auto& x : net.crossbars()) scales.push_back(x.w_max());
    Network fresh(net.topology(), device, scales, write_options(config, config.seed));
    fresh.program(weights);
    return fresh;
  };
  TrainState s = trained;
  s.generator = rebuild(trained.generator, trained.generator_weights);
  s.discriminator = rebuild(trained.discriminator, trained.discriminator_weights);
  return s;
}

/// Generated images in [-1, 1] from the context's fixed latent draws.
inline std::vector<Tensor> generated_images(const TrainState& state, const ExperimentContext& ctx, const TrainConfig& config,
                                            std::size_t n) {
  TrainState scratch = state;  // leakage draws must not disturb the run's streams
  scratch.streams.leakage = Stream(substream_seed(ctx.sample_seed, "eval-leakage"));
  ForwardOptions opt = forward_options(config, scratch, false);
  return to_unit_range(generate_samples(n, scratch.generator, ctx.sample_seed, opt), ctx.v_scale());
}

/// Fit of the real data, computed once per context.
class QualityEvaluator {
 public:
  explicit QualityEvaluator(const ExperimentContext& ctx) : ctx_(ctx), reference_(fit_gaussian(ctx.dataset)) {}

  double operator()(const TrainState& state, const TrainConfig& config) const {
    const auto images = generated_images(state, ctx_, config, ctx_.metric_samples);
    return frechet_distance(fit_gaussian(images), reference_);
  }

 private:
  const ExperimentContext& ctx_;
  GaussianFit reference_;
};

/// A gallery of generated images, in volts, for grid output.
inline std::vector<Tensor> gallery(const TrainState& state, const ExperimentContext& ctx, const TrainConfig& config,
                                   std::size_t n = kGallerySize) {
  auto images = generated_images(state, ctx, config, n);
  for (auto& t : images)
    for (double& v : t.data()) v *= ctx.v_scale();
  return images;
}

enum class SweepMode {
  deploy,   // train once at the base config, write the weights onto each swept device
  retrain,  // train from scratch at every sweep point
};

struct SweepPoint {
  double variability = 0.0;
  std::uint64_t update_events = 0;
  std::size_t n_levels = 0;
  double quality = 0.0;
  EpochLoss loss{};
  std::vector<Tensor> gallery;  // volts
};

inline EpochLoss last_loss_of(const TrainState& s) { return s.history.empty() ? EpochLoss{} : s.history.back(); }

namespace detail {

inline TrainState train_fresh(const ExperimentContext& ctx, const DeviceSpec& device, const TrainConfig& config) {
  TrainState s = init_state(ctx.topology, device, config);
  train(ctx.dataset, s, config);
  return s;
}

template <typename Vary>
std::vector<SweepPoint> sweep(const ExperimentContext& ctx, std::size_t points, SweepMode mode, Vary vary) {
  const QualityEvaluator quality(ctx);
  std::optional<TrainState> base;
  if (mode == SweepMode::deploy) base = train_fresh(ctx, ctx.device, ctx.train);
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < points; ++i) {
    DeviceSpec device = ctx.device;
    TrainConfig config = ctx.train;
    vary(i, device, config);
    const TrainState s = mode == SweepMode::deploy ? deploy(*base, device, config) : train_fresh(ctx, device, config);
    SweepPoint p;
    p.variability = config.analog.variability;
    p.n_levels = device.n_levels;
    p.quality = quality(s, config);
    p.loss = last_loss_of(s);
    p.update_events = s.update_events;
    p.gallery = gallery(s, ctx, config);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace detail

inline const std::vector<double> kDefaultVariabilitySweep = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
inline const std::vector<std::size_t> kDefaultLevelSweep = {2, 4, 8, 16, 32, 64, 128, 256};
inline const std::vector<std::size_t> kDefaultSnapshotEpochs = {1, 20, 50, 70};

/// Quality versus device variability (sigma_pct), at the context's level count.
/// By default the weights are trained once and then written onto devices
/// with the swept spread.
inline std::vector<SweepPoint> sweep_variability(const ExperimentContext& ctx, const std::vector<double>& sigmas,
                                                 SweepMode mode = SweepMode::deploy) {
  if (sigmas.empty()) throw Error(ErrorCategory::config, "sweep-variability: empty variability list");
  return detail::sweep(ctx, sigmas.size(), mode, [&](std::size_t i, DeviceSpec&, TrainConfig& c) {
    c.analog.quantize = true;
    c.analog.variability = sigmas[i];
  });
}

/// Quality versus number of programmable levels, without variability.
/// The level count bounds what the in-situ update can write, so by default
/// every point is trained on its own device.
inline std::vector<SweepPoint> sweep_levels(const ExperimentContext& ctx, const std::vector<std::size_t>& levels,
                                            SweepMode mode = SweepMode::retrain) {
  if (levels.empty()) throw Error(ErrorCategory::config, "sweep-levels: empty level list");
  return detail::sweep(ctx, levels.size(), mode, [&](std::size_t i, DeviceSpec& d, TrainConfig& c) {
    d.n_levels = levels[i];
    c.analog.quantize = true;
    c.analog.variability = 0.0;
  });
}

struct Snapshot {
  std::size_t epoch = 0;
  std::uint64_t update_events = 0;
  double quality = 0.0;
  EpochLoss loss{};
  std::vector<Tensor> gallery;  // volts
};

/// Trains to the last requested epoch and evaluates at each one. If training
/// diverges, the snapshots taken so far are returned, the failure is stored
/// in `failure`, and the first requested snapshot is always present (taken
/// from the last finite state when divergence came before it).
inline std::vector<Snapshot> snapshot_epochs(const ExperimentContext& ctx, std::vector<std::size_t> epochs,
                                             std::string* failure = nullptr) {
  if (epochs.empty()) throw Error(ErrorCategory::config, "snapshot-epochs: empty epoch list");
  std::sort(epochs.begin(), epochs.end());
  if (epochs.front() == 0) throw Error(ErrorCategory::config, "snapshot-epochs: epochs start at 1");
  TrainConfig config = ctx.train;
  config.epochs = epochs.back();
  const QualityEvaluator quality(ctx);
  TrainState s = init_state(ctx.topology, ctx.device, config);
  std::vector<Snapshot> out;
  std::size_t next = 0;
  try {
    while (next < epochs.size()) {
      const EpochLoss l = train_epoch(ctx.dataset, s, config);
      if (s.epoch == epochs[next]) {
        out.push_back({s.epoch, s.update_events, quality(s, config), l, gallery(s, ctx, config)});
        while (next < epochs.size() && epochs[next] == s.epoch) ++next;
      }
    }
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::numeric) throw;
    if (failure) *failure = e.what();
    if (out.empty()) out.push_back({epochs.front(), s.update_events, quality(s, config), last_loss_of(s), gallery(s, ctx, config)});
  }
  return out;
}

}  // namespace memgan
