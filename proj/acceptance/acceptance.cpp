// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "memgan/config.hpp"
#include "memgan/cost.hpp"
#include "memgan/experiments.hpp"
#include "memgan/mnist.hpp"

using namespace memgan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

Matrix random_matrix(std::size_t r, std::size_t c, Stream& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

std::vector<double> random_vector(std::size_t n, Stream& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

Tensor random_tensor(const Shape& s, Stream& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. Write time and power of the update schemes.
Outcome write_schedule() {
  Outcome o;
  const auto row = [](UpdateScheme s) {
    ScheduleConfig c;
    c.scheme = s;
    c.topology = {1'700'000, 6, 784};
    return schedule_report(c, 50, 60000);
  };
  const auto check = [&](bool ok, const std::string& what) {
    if (!ok) {
      o.pass = false;
      o.detail += " [" + what + "]";
    }
  };
  const auto two = row(UpdateScheme::two_cycle_layer_series);
  const auto four = row(UpdateScheme::four_cycle_layer_series);
  const auto col = row(UpdateScheme::column_parallel_layer_parallel);
  const auto net = row(UpdateScheme::net_parallel_layer_seq);
  check(two.events == 3'000'000, "events");
  check(std::abs(two.training_time_variants[0] - 0.36) < 1e-12, "two-cycle 10 ns");
  check(std::abs(two.training_time_variants[1] - 3.6) < 1e-11, "two-cycle 100 ns");
  check(std::abs(two.training_time_variants[2] - 36.0) < 1e-10, "two-cycle 1000 ns");
  check(rel(two.power_max, 35.4) <= 1e-3, "two-cycle P_max");
  check(rel(two.power_min, 5.6) <= 0.02, "two-cycle P_min");
  check(std::abs(four.training_time_variants[0] - 0.72) < 1e-12, "four-cycle 10 ns");
  check(std::abs(four.training_time_variants[1] - 7.2) < 1e-11, "four-cycle 100 ns");
  check(std::abs(four.training_time_variants[2] - 72.0) < 1e-10, "four-cycle 1000 ns");
  check(rel(four.power_max, 17.2) <= 0.03, "four-cycle P_max");
  check(rel(four.power_min, 2.8) <= 0.02, "four-cycle P_min");
  check(rel(col.training_time_variants[0], 23.552) <= 0.005, "column-parallel time");
  const auto& ref = reference_row(UpdateScheme::net_parallel_layer_seq);
  check(!ref.reproducible, "net-parallel flag");
  o.detail = fmt("two-cycle %.2f/%.1f/%.0f s %.3f/%.3f W; four-cycle %.2f/%.1f/%.0f s %.3f/%.3f W; column-parallel %.2f s;"
                 " net-parallel %.3g s vs reference %.3g s (reference-discrepancy, not matched)",
                 two.training_time_variants[0], two.training_time_variants[1], two.training_time_variants[2],
                 two.power_max, two.power_min, four.training_time_variants[0], four.training_time_variants[1],
                 four.training_time_variants[2], four.power_max, four.power_min, col.training_time_variants[0],
                 net.training_time_variants[0], ref.time[0]) +
             o.detail;
  return o;
}

// 2. CMOS budget of one of each component.
Outcome cmos_budget() {
  const auto t = cmos_cost({1, 1, 1, 1, 1});
  Outcome o;
  o.pass = std::abs(t.power_mw - 35.7619) < 1e-9 && std::abs(t.area_um2 - 1529.7) < 1e-9;
  o.detail = fmt("%.4f mW, %.1f um^2", t.power_mw, t.area_um2);
  return o;
}

// 3. Ideal readout against a signed matrix-vector product rebuilt from conductances.
Outcome ideal_readout() {
  Stream rng(301);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t r = 1 + rng.below(16), c = 1 + rng.below(16);
    const auto x = map_weights(random_matrix(r, c, rng), DeviceSpec{}, rng.below(2) == 1);
    const auto v = random_vector(r, rng);
    const auto got = read(x, v, ReadoutMode::ideal);
    const double g_off = x.spec().g_off(), g_on = x.spec().g_on();
    for (std::size_t j = 0; j < c; ++j) {
      double want = 0.0;
      for (std::size_t i = 0; i < r; ++i) want += x.sign(i, j) * (x.g_read(i, j) - g_off) / (g_on - g_off) * x.w_max() * v[i];
      worst = std::max(worst, std::abs(got[j] - want) / std::max(1.0, std::abs(want)));
    }
  }
  return {worst <= 1e-9, fmt("max relative error %.3g over 1000 instances", worst)};
}

// 4. Loaded readout never exceeds the largest input magnitude.
Outcome loaded_bound() {
  Stream rng(401);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t r = 1 + rng.below(16), c = 1 + rng.below(16);
    CrossbarArray x(DeviceSpec{}, r, c, 1.0, rng.below(2) == 1,
                    {rng.uniform(0.0, 0.5), VariabilityDistribution::multiplicative_gaussian, rng.below(1000)});
    x.program(random_matrix(r, c, rng));
    const auto v = random_vector(r, rng, rng.uniform(0.1, 2.0));
    double vmax = 0.0;
    for (double a : v) vmax = std::max(vmax, std::abs(a));
    for (double out : read(x, v, ReadoutMode::loaded)) violations += std::abs(out) > vmax;
  }
  return {violations == 0, fmt("%d violations over 1000 crossbars", violations)};
}

// 5. Backpropagation against central differences on the toy networks.
Outcome gradient_check() {
  const GanTopology topo = toy_topology();
  double worst = 0.0;
  std::size_t params = 0;
  Stream rng(501);
  for (const NetworkTopology* t : {&topo.discriminator, &topo.generator}) {
    std::vector<Matrix> w;
    for (const auto& l : t->layers)
      if (l.has_crossbar()) w.push_back(random_matrix(l.crossbar_rows(), l.crossbar_cols(), rng, 0.5));
    const auto make = [&](const std::vector<Matrix>& ws) {
      Network n(*t, DeviceSpec{}, std::vector<double>(ws.size(), 4.0));
      n.program(ws);
      return n;
    };
    const Network net = make(w);
    const Tensor x = random_tensor(t->input_shape(), rng, -0.9, 0.9);
    const Tensor r = random_tensor(t->output_shape(), rng);
    const auto loss = [&](const Network& n) { return dot(n.forward(x).values(), r.values()); };
    auto grads = net.zero_gradients();
    net.backward(net.forward_traced(x), r, &grads);
    const double h = 1e-5;
    for (std::size_t k = 0; k < w.size(); ++k)
      for (std::size_t i = 0; i < w[k].size(); ++i) {
        auto wp = w, wm = w;
        wp[k].data()[i] += h;
        wm[k].data()[i] -= h;
        const double fd = (loss(make(wp)) - loss(make(wm))) / (2 * h);
        const double g = grads[k].data()[i];
        worst = std::max(worst, std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6}));
        ++params;
      }
  }
  return {worst < 1e-4, fmt("max relative error %.3g over %zu parameters", worst, params)};
}

// 6. <conv(x), y> = <x, deconv(y)> with the transposed kernel.
Outcome adjointness() {
  Stream rng(601);
  double worst = 0.0;
  int checked = 0;
  while (checked < 100) {
    const std::size_t k = 1 + rng.below(4), s = 1 + rng.below(2), p = rng.below(k);
    const std::size_t H = k + rng.below(6), W = k + rng.below(6), C = 1 + rng.below(3), F = 1 + rng.below(3);
    const std::size_t Ho = (H + 2 * p - k) / s + 1, Wo = (W + 2 * p - k) / s + 1;
    const std::size_t op_h = H + 2 * p - k - (Ho - 1) * s, op_w = W + 2 * p - k - (Wo - 1) * s;
    if (op_h != op_w) continue;
    LayerDesc conv;
    conv.kind = LayerKind::conv;
    conv.kernel_h = conv.kernel_w = k;
    conv.filters = F;
    conv.stride = s;
    conv.padding = p;
    LayerDesc deconv = conv;
    deconv.kind = LayerKind::deconv;
    deconv.filters = C;
    deconv.output_padding = op_h;
    const auto cx = map_weights(random_matrix(k * k * C, F, rng), DeviceSpec{}, false);
    const auto dx = map_weights(transpose_kernel(cx.weights(), k, k, C), DeviceSpec{}, false, cx.w_max());
    const Tensor x = random_tensor({H, W, C}, rng);
    const Tensor y = random_tensor({Ho, Wo, F}, rng);
    const double lhs = dot(conv2d(x, cx, conv, ReadoutMode::ideal).values(), y.values());
    const double rhs = dot(x.values(), deconv2d(y, dx, deconv, ReadoutMode::ideal).values());
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    ++checked;
  }
  return {worst <= 1e-9, fmt("max relative gap %.3g over 100 pairs", worst)};
}

// 7. Quantization is idempotent and within half a level gap.
Outcome quantization() {
  Stream rng(701);
  std::size_t failures = 0;
  for (std::size_t n : {2, 64, 256}) {
    DeviceSpec d;
    d.n_levels = n;
    const double half = 0.5 * d.level_gap() * (1.0 + 1e-12);
    for (int i = 0; i < 100000; ++i) {
      const double g = rng.uniform(d.g_off(), d.g_on());
      const double q = quantize(g, d);
      failures += quantize(q, d) != q || std::abs(q - g) > half;
    }
  }
  return {failures == 0, fmt("%zu failures over 3 x 1e5 conductances", failures)};
}

struct DeskTrends {
  std::vector<double> var0, var30, var50, lvl2, lvl64, lvl256, ep1, ep5;
  std::uint64_t events_at_5 = 0;
};

DeskTrends desk_trends(const std::vector<Tensor>& data) {
  DeskTrends t;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentContext ctx{reference_small_topology(), DeviceSpec{}, TrainConfig{}, data, 1000, 7};
    ctx.train.epochs = 5;
    ctx.train.seed = seed;
    const auto var = sweep_variability(ctx, {0.0, 0.3, 0.5});
    t.var0.push_back(var[0].quality);
    t.var30.push_back(var[1].quality);
    t.var50.push_back(var[2].quality);
    const auto lvl = sweep_levels(ctx, {2, 64, 256});
    t.lvl2.push_back(lvl[0].quality);
    t.lvl64.push_back(lvl[1].quality);
    t.lvl256.push_back(lvl[2].quality);
    const auto snaps = snapshot_epochs(ctx, {1, 5});
    t.ep1.push_back(snaps.at(0).quality);
    t.ep5.push_back(snaps.at(1).quality);
    t.events_at_5 = snaps.at(1).update_events;
    std::fprintf(stderr, "seed %llu: var %.1f/%.1f/%.1f levels %.1f/%.1f/%.1f epochs %.1f/%.1f\n",
                 static_cast<unsigned long long>(seed), var[0].quality, var[1].quality, var[2].quality, lvl[0].quality,
                 lvl[1].quality, lvl[2].quality, snaps[0].quality, snaps[1].quality);
  }
  return t;
}

// 8. Median quality orderings over five seeds at desk scale.
Outcome tolerance_trends(const DeskTrends& t) {
  const double v0 = median(t.var0), v30 = median(t.var30), v50 = median(t.var50);
  const double l2 = median(t.lvl2), l64 = median(t.lvl64), l256 = median(t.lvl256);
  const double e1 = median(t.ep1), e5 = median(t.ep5);
  Outcome o;
  o.pass = v0 <= v30 && v30 <= v50 && l64 <= 1.25 * l256 && l2 >= 1.5 * l256 && e5 < e1;
  o.detail = fmt("variability 0/30/50%%: %.1f/%.1f/%.1f; levels 2/64/256: %.1f/%.1f/%.1f; epoch 1/5: %.1f/%.1f",
                 v0, v30, v50, l2, l64, l256, e1, e5);
  return o;
}

// 9. Idle-row leakage grows with the noise level.
Outcome leakage_trend() {
  Stream wrng(substream_seed(1, "weights"));
  const auto x = map_weights(random_matrix(32, 32, wrng), DeviceSpec{}, false, 1.0);
  std::vector<double> means;
  for (double noise : {0.0, 0.1, 0.2, 0.4}) {
    Stream rng(substream_seed(1, "leakage"));
    double s = 0.0;
    for (int i = 0; i < 10000; ++i) s += leakage_current(x, noise, rng).total;
    means.push_back(s / 10000);
  }
  const bool ok = means[0] == 0.0 && means[0] < means[1] && means[1] < means[2] && means[2] < means[3];
  return {ok, fmt("mean total %.3g/%.3g/%.3g/%.3g A", means[0], means[1], means[2], means[3])};
}

// 10. One update event per presented image.
Outcome update_accounting(std::uint64_t desk_events) {
  ScheduleConfig c;
  c.topology = {1'700'000, 6, 784};
  const auto full = schedule_report(c, 50, 60000).events;
  const GanTopology topo = toy_topology();
  TrainConfig config;
  config.epochs = 50;
  config.batch_size = 4;
  std::vector<Tensor> data(60, Tensor(topo.image_shape(), 0.0));
  TrainState s = init_state(topo, DeviceSpec{}, config);
  train(data, s, config);
  const bool ok = full == 3'000'000 && desk_events == 5000 && s.update_events == 3000;
  return {ok, fmt("schedule %llu events; desk run 5 x 1000 -> %llu; counter 50 x 60 -> %llu",
                  static_cast<unsigned long long>(full), static_cast<unsigned long long>(desk_events),
                  static_cast<unsigned long long>(s.update_events))};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MEMGAN_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      out[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(in), {}};
    }
  return out;
}

// 11. Identical config and seed give byte-identical outputs.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "memgan_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "desk.ini") << "[data]\nlimit = 30\n[train]\nepochs = 2\n[eval]\nmetric_samples = 30\n"
                                      "[sweep]\nvariability = 0, 0.3\nlevels = 2, 64\nsnapshot_epochs = 1, 2\n"
                                      "[leakage]\ntrials = 200\n";
  const std::string cfg = "--config " + (root / "desk.ini").string();
  std::string failed;
  std::size_t files = 0;
  const auto twice = [&](const std::string& name, const std::string& args) {
    for (const char* r : {"a", "b"})
      if (run_cli(args + " --out " + (root / name / r).string()) != 0) failed += " " + name + "(exit)";
    const auto a = tree(root / name / "a");
    if (a.empty() || a != tree(root / name / "b")) failed += " " + name;
    files += a.size();
  };
  twice("train", "train " + cfg);
  twice("generate", "generate " + cfg + " --checkpoint " + (root / "train/a/checkpoint.mgck").string());
  for (const char* sub : {"sweep-variability", "sweep-levels", "snapshot-epochs", "cost", "leakage"})
    twice(sub, std::string(sub) + " " + cfg);
  fs::remove_all(root);
  return {failed.empty(), failed.empty() ? fmt("7 subcommands, %zu files identical across runs", files)
                                         : "differences in:" + failed};
}

}  // namespace

int main() {
  ::setenv(kDataEnvVar, MEMGAN_SOURCE_DIR "/data/mnist-subset", 0);
  int failures = 0;
  const auto report = [&](int n, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d. %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  report(1, "write time and power", write_schedule);
  report(2, "CMOS budget", cmos_budget);
  report(3, "ideal readout oracle", ideal_readout);
  report(4, "loaded readout bound", loaded_bound);
  report(5, "gradient check", gradient_check);
  report(6, "conv/deconv adjointness", adjointness);
  report(7, "quantization properties", quantization);

  DeskTrends trends;
  std::string trend_error;
  try {
    const auto data = load_mnist(std::getenv(kDataEnvVar), 1000, reference_small_topology().image_shape()).images;
    trends = desk_trends(data);
  } catch (const std::exception& e) {
    trend_error = e.what();
  }
  report(8, "device-tolerance trends", [&]() -> Outcome {
    if (!trend_error.empty()) return {false, "exception: " + trend_error};
    return tolerance_trends(trends);
  });
  report(9, "leakage trend", leakage_trend);
  report(10, "update accounting", [&] { return update_accounting(trends.events_at_5); });
  report(11, "determinism", determinism);
  return failures == 0 ? 0 : 1;
}
