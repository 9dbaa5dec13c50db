// memgan: command-line front end for training, sweeps and budget reports.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "memgan/checkpoint.hpp"
#include "memgan/config.hpp"
#include "memgan/cost.hpp"
#include "memgan/experiments.hpp"
#include "memgan/mnist.hpp"

namespace fs = std::filesystem;
using namespace memgan;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string device;
  std::string topology;
  bool full_scale = false;
  bool timing = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "run configuration file");
  app->add_option("--seed", f.seed, "root seed (overrides the config)");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--device", f.device, "device: wo2 or a file with a [device] section");
  app->add_option("--topology", f.topology, "reference-small | reference-full | toy | topology JSON file");
  app->add_flag("--full-scale", f.full_scale, "whole dataset file and at least 50 epochs");
  app->add_flag("--timing", f.timing, "add wall-clock seconds to metrics files");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.seed) c.seed = *f.seed;
  c.train.seed = c.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.device.empty()) c.device = device_by_name(f.device);
  if (!f.topology.empty()) c.topology = f.topology;
  if (f.full_scale) apply_full_scale(c);
  if (f.timing) c.timing = true;
  validate(c);
  return c;
}

void prepare_out(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create output directory " + c.out_dir.string() + ": " + ec.message());
}

ExperimentContext make_context(const RunConfig& c) {
  ExperimentContext ctx;
  ctx.topology = topology_by_name(c.topology, c.latent_dim);
  ctx.device = c.device;
  ctx.train = c.train;
  ctx.dataset = load_mnist(resolve_data_path(c), c.data_limit, ctx.topology.image_shape()).images;
  ctx.metric_samples = c.metric_samples;
  ctx.sample_seed = c.sample_seed;
  return ctx;
}

void write_grid(const fs::path& path, const std::vector<Tensor>& images, double v_scale) {
  write_pgm(path, make_grid(images, v_scale));
}

std::string label(double v) { return format_number(v); }

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCategory::io, "failed writing " + path.string());
}

int run_train(const RunConfig& c) {
  prepare_out(c);
  const ExperimentContext ctx = make_context(c);
  const QualityEvaluator quality(ctx);
  const Clock clock;
  TrainState state = init_state(ctx.topology, ctx.device, ctx.train);
  std::vector<MetricsRecord> records;
  const auto on_epoch = [&](const TrainState& s, const EpochLoss& l) {
    MetricsRecord r{"train", s.epoch, l.d_loss, l.g_loss, quality(s, ctx.train), ctx.train.analog.variability,
                    ctx.device.n_levels, s.update_events, std::nullopt};
    if (c.timing) r.wall_seconds = clock.seconds();
    records.push_back(r);
    write_grid(c.out_dir / ("samples_epoch_" + std::to_string(s.epoch) + ".pgm"),
               gallery(s, ctx, ctx.train, c.gallery_size), ctx.v_scale());
    std::printf("epoch %zu  d_loss %.4f  g_loss %.4f  quality %.2f  events %llu\n", s.epoch, l.d_loss, l.g_loss,
                r.quality, static_cast<unsigned long long>(s.update_events));
  };
  try {
    train(ctx.dataset, state, ctx.train, on_epoch);
  } catch (const Error&) {
    write_metrics_csv(c.out_dir / "metrics.csv", records, c.timing);
    throw;
  }
  write_metrics_csv(c.out_dir / "metrics.csv", records, c.timing);
  save_checkpoint(state, c.out_dir / "checkpoint.mgck");
  std::printf("wrote %s\n", (c.out_dir / "checkpoint.mgck").string().c_str());
  return 0;
}

int run_generate(const RunConfig& c, const std::string& checkpoint, std::optional<std::size_t> count) {
  prepare_out(c);
  TrainState state = load_checkpoint(checkpoint, c.device);
  const std::size_t n = count.value_or(c.gallery_size);
  const auto& last = state.generator.topology().layers.back();
  const double v_scale = last.kind == LayerKind::tanh ? last.level : 1.0;
  const ForwardOptions opt = forward_options(c.train, state, false);
  const auto images = generate_samples(n, state.generator, c.seed, opt);
  if (images.empty()) {
    std::printf("no samples requested\n");
    return 0;
  }
  write_grid(c.out_dir / "samples.pgm", images, v_scale);
  std::printf("wrote %zu samples to %s\n", n, (c.out_dir / "samples.pgm").string().c_str());
  return 0;
}

void report_sweep(const RunConfig& c, const ExperimentContext& ctx, const std::vector<SweepPoint>& points,
                  const std::string& prefix, bool by_levels, const Clock& clock) {
  std::vector<MetricsRecord> records;
  for (const auto& p : points) {
    const std::string id = by_levels ? "levels-" + std::to_string(p.n_levels) : "variability-" + label(p.variability);
    MetricsRecord r{id, p.loss.epoch, p.loss.d_loss, p.loss.g_loss, p.quality, p.variability, p.n_levels, p.update_events,
                    std::nullopt};
    if (c.timing) r.wall_seconds = clock.seconds();
    records.push_back(r);
    const std::string stem = by_levels ? prefix + std::to_string(p.n_levels) : prefix + label(p.variability);
    write_grid(c.out_dir / (stem + ".pgm"), p.gallery, ctx.v_scale());
    if (by_levels && p.n_levels == 256) write_grid(c.out_dir / "baseline.pgm", p.gallery, ctx.v_scale());
    std::printf("%-18s quality %.2f\n", id.c_str(), p.quality);
  }
  write_metrics_csv(c.out_dir / "metrics.csv", records, c.timing);
}

int run_sweep_variability(const RunConfig& c) {
  prepare_out(c);
  const ExperimentContext ctx = make_context(c);
  const Clock clock;
  const auto points = sweep_variability(ctx, c.sweep.variability, c.sweep.variability_mode);
  report_sweep(c, ctx, points, "variability_", false, clock);
  return 0;
}

int run_sweep_levels(const RunConfig& c) {
  prepare_out(c);
  const ExperimentContext ctx = make_context(c);
  const Clock clock;
  const auto points = sweep_levels(ctx, c.sweep.levels, c.sweep.levels_mode);
  report_sweep(c, ctx, points, "levels_", true, clock);
  return 0;
}

int run_snapshots(const RunConfig& c) {
  prepare_out(c);
  const ExperimentContext ctx = make_context(c);
  const Clock clock;
  std::string failure;
  const auto snaps = snapshot_epochs(ctx, c.sweep.snapshot_epochs, &failure);
  std::vector<MetricsRecord> records;
  for (const auto& s : snaps) {
    MetricsRecord r{"epoch-" + std::to_string(s.epoch), s.epoch, s.loss.d_loss, s.loss.g_loss, s.quality,
                    ctx.train.analog.variability, ctx.device.n_levels, s.update_events, std::nullopt};
    if (c.timing) r.wall_seconds = clock.seconds();
    records.push_back(r);
    write_grid(c.out_dir / ("epoch_" + std::to_string(s.epoch) + ".pgm"), s.gallery, ctx.v_scale());
    std::printf("epoch %-4zu quality %.2f  events %llu\n", s.epoch, s.quality,
                static_cast<unsigned long long>(s.update_events));
  }
  write_metrics_csv(c.out_dir / "metrics.csv", records, c.timing);
  if (!failure.empty()) {
    std::fprintf(stderr, "memgan: %s (snapshots up to the failure were written)\n", failure.c_str());
    return static_cast<int>(ErrorCategory::numeric);
  }
  return 0;
}

int run_cost(const RunConfig& c) {
  prepare_out(c);
  ScheduleConfig sc;
  sc.device = c.device;
  sc.topology = c.cost.from_topology ? topology_stats(topology_by_name(c.topology, c.latent_dim)) : c.cost.stats;

  std::ostringstream text, csv;
  text << "weights " << sc.topology.weights << ", crossbar layers " << sc.topology.layers << ", widest crossbar "
       << sc.topology.max_columns << " columns, " << c.cost.epochs << " epochs x " << c.cost.images
       << " images\n\n";
  char line[512];
  std::snprintf(line, sizeof line, "%-32s %9s %12s %12s %12s %10s %10s %12s %10s %10s\n", "scheme", "t_write_ns",
                "steps/event", "writes/step", "time_s", "P_max_W", "P_min_W", "ref_time_s", "ref_Pmax", "ref_Pmin");
  text << line;
  csv << "scheme,t_write_s,steps_per_event,parallel_writes_per_step,training_time_s,power_max_w,power_min_w,"
         "reference_time_s,reference_power_max_w,reference_power_min_w,reference_reproducible\n";
  std::vector<std::string> notes;
  for (const auto scheme : kAllSchemes) {
    sc.scheme = scheme;
    const ScheduleReport r = schedule_report(sc, c.cost.epochs, c.cost.images);
    const ReferenceRow& ref = reference_row(scheme);
    for (std::size_t i = 0; i < kWriteTimes.size(); ++i) {
      std::snprintf(line, sizeof line, "%-32s %9.0f %12llu %12llu %12.6g %10.6g %10.6g %12.6g %10.6g %10.6g\n",
                    to_string(scheme), kWriteTimes[i] * 1e9, static_cast<unsigned long long>(r.steps_per_event),
                    static_cast<unsigned long long>(r.parallel_writes_per_step), r.training_time_variants[i],
                    r.power_max, r.power_min, ref.time[i], ref.power_max, ref.power_min);
      text << line;
      csv << to_string(scheme) << ',' << format_number(kWriteTimes[i]) << ',' << r.steps_per_event << ','
          << r.parallel_writes_per_step << ',' << format_number(r.training_time_variants[i]) << ','
          << format_number(r.power_max) << ',' << format_number(r.power_min) << ',' << format_number(ref.time[i]) << ','
          << format_number(ref.power_max) << ',' << format_number(ref.power_min) << ',' << (ref.reproducible ? 1 : 0)
          << "\n";
    }
    if (!ref.reproducible)
      notes.push_back(std::string("reference-discrepancy: ") + to_string(scheme) +
                      ": the published time is not reproducible by any write count consistent with its own power "
                      "figure; model output shown beside it");
  }
  for (const auto& n : notes) text << n << "\n";

  const CmosTotals totals = cmos_cost(c.cost.counts, c.cost.table);
  std::ostringstream cmos;
  cmos << "component,count,power_mw_each,area_um2_each\n";
  text << "\nCMOS components\n";
  for (std::size_t i = 0; i < kAllComponents.size(); ++i) {
    const auto& e = c.cost.table.entries[i];
    std::snprintf(line, sizeof line, "%-16s count %10llu  %9.4f mW  %8.1f um^2 each\n", to_string(kAllComponents[i]),
                  static_cast<unsigned long long>(c.cost.counts[i]), e.power_mw, e.area_um2);
    text << line;
    cmos << to_string(kAllComponents[i]) << ',' << c.cost.counts[i] << ',' << format_number(e.power_mw) << ','
         << format_number(e.area_um2) << "\n";
  }
  std::snprintf(line, sizeof line, "total %.6g mW (%.6g W), %.6g um^2 (%.6g mm^2)\n", totals.power_mw, totals.power_w(),
                totals.area_um2, totals.area_mm2());
  text << line;
  cmos << "total,," << format_number(totals.power_mw) << ',' << format_number(totals.area_um2) << "\n";

  write_text(c.out_dir / "cost.txt", text.str());
  write_text(c.out_dir / "cost.csv", csv.str());
  write_text(c.out_dir / "cmos.csv", cmos.str());
  std::cout << text.str();
  return 0;
}

int run_leakage(const RunConfig& c) {
  prepare_out(c);
  const auto& lc = c.leakage;
  Stream weights(substream_seed(c.seed, "weights"));
  Matrix w(lc.rows, lc.cols);
  for (double& v : w.data()) v = weights.uniform(-1.0, 1.0);
  const CrossbarArray xbar = map_weights(w, c.device, c.train.analog.quantize, 1.0);

  std::ostringstream csv;
  csv << "noise_level,trials,mean_total_a,stddev_total_a,mean_max_column_a\n";
  std::printf("%-12s %16s %16s\n", "noise_level", "mean_total_A", "stddev_total_A");
  for (double noise : lc.noise_levels) {
    Stream rng(substream_seed(c.seed, "leakage"));
    double sum = 0.0, sum_sq = 0.0, col_max = 0.0;
    for (std::size_t t = 0; t < lc.trials; ++t) {
      const LeakageReport r = leakage_current(xbar, noise, rng);
      sum += r.total;
      sum_sq += r.total * r.total;
      col_max += *std::max_element(r.per_column.begin(), r.per_column.end());
    }
    const double n = static_cast<double>(lc.trials);
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
    csv << format_number(noise) << ',' << lc.trials << ',' << format_number(mean) << ',' << format_number(sd) << ','
        << format_number(col_max / n) << "\n";
    std::printf("%-12g %16.6e %16.6e\n", noise, mean, sd);
  }
  write_text(c.out_dir / "leakage.csv", csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memgan: memristive GAN accelerator simulator"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string checkpoint;
  std::optional<std::size_t> count;

  auto* train_cmd = app.add_subcommand("train", "train a GAN and write metrics, sample grids and a checkpoint");
  auto* gen_cmd = app.add_subcommand("generate", "sample images from a checkpoint");
  auto* var_cmd = app.add_subcommand("sweep-variability", "quality versus device variability");
  auto* lvl_cmd = app.add_subcommand("sweep-levels", "quality versus number of conductance levels");
  auto* snap_cmd = app.add_subcommand("snapshot-epochs", "quality and samples at chosen epochs");
  auto* cost_cmd = app.add_subcommand("cost", "write-time, write-power and CMOS budgets");
  auto* leak_cmd = app.add_subcommand("leakage", "idle-row leakage current versus noise level");
  for (auto* s : {train_cmd, gen_cmd, var_cmd, lvl_cmd, snap_cmd, cost_cmd, leak_cmd}) add_common(s, flags);
  gen_cmd->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
  gen_cmd->add_option("--count", count, "number of samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorCategory::config);
  }

  try {
    const RunConfig c = resolve(flags);
    if (*train_cmd) return run_train(c);
    if (*gen_cmd) return run_generate(c, checkpoint, count);
    if (*var_cmd) return run_sweep_variability(c);
    if (*lvl_cmd) return run_sweep_levels(c);
    if (*snap_cmd) return run_snapshots(c);
    if (*cost_cmd) return run_cost(c);
    if (*leak_cmd) return run_leakage(c);
  } catch (const Error& e) {
    std::fprintf(stderr, "memgan: %s error: %s\n", to_string(e.category()), e.what());
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "memgan: %s\n", e.what());
    return 1;
  }
  return 1;
}
