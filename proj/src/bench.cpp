#include "ufse/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "ufse/csv.hpp"

namespace ufse {

namespace {

// Non-negative, correlated-ish activations resembling relu outputs.
void refill(FeatureMap& f, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  auto v = f.values();
  for (auto& x : v) x = std::max(0.0f, normal(rng) + 0.3f);
}

std::vector<double> run_trials(AlignmentKind kind, std::int64_t c, std::int64_t h, std::int64_t w, int trials,
                               int warmup, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureMap content(c, h, w), style(c, h, w);
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(trials));
  double sink = 0;
  for (int t = 0; t < warmup + trials; ++t) {
    refill(content, rng);
    refill(style, rng);
    const auto start = std::chrono::steady_clock::now();
    const FeatureMap out = align(kind, content, style);
    const auto stop = std::chrono::steady_clock::now();
    sink += out.values()[0];
    if (t >= warmup) times.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  // Keeps the transform from being optimised away.
  if (sink == -1.2345) times.push_back(0);
  return times;
}

}  // namespace

BenchResult bench_alignment(AlignmentKind kind, std::int64_t channels, std::int64_t height, std::int64_t width,
                            int trials, const BenchOptions& options) {
  if (trials < 1) throw UsageError("bench needs at least one trial");
  if (channels < 1 || height < 1 || width < 1 || height * width < 2) throw UsageError("bench feature size too small");
  if (options.threads < 1 || options.warmup < 0) throw UsageError("bench threads must be >= 1 and warmup >= 0");

  std::vector<double> times;
  if (options.threads == 1) {
    times = run_trials(kind, channels, height, width, trials, options.warmup, options.seed);
  } else {
    std::vector<std::vector<double>> per(static_cast<std::size_t>(options.threads));
    std::vector<std::thread> workers;
    for (int t = 0; t < options.threads; ++t) {
      const int share = trials / options.threads + (t < trials % options.threads ? 1 : 0);
      workers.emplace_back([&, t, share] {
        per[t] = run_trials(kind, channels, height, width, share, options.warmup, options.seed + t);
      });
    }
    for (auto& w : workers) w.join();
    for (auto& p : per) times.insert(times.end(), p.begin(), p.end());
  }

  BenchResult r;
  r.kind = kind;
  r.channels = channels;
  r.height = height;
  r.width = width;
  r.trials = static_cast<int>(times.size());
  r.threads = options.threads;
  double sum = 0;
  for (double t : times) sum += t;
  r.mean_ms = sum / r.trials;
  double ss = 0;
  for (double t : times) ss += (t - r.mean_ms) * (t - r.mean_ms);
  r.stddev_ms = std::sqrt(ss / r.trials);
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  r.median_ms = times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
  return r;
}

std::string bench_csv_header() { return "kind,channels,height,width,trials,threads,mean_ms,median_ms,stddev_ms"; }

std::string bench_csv_row(const BenchResult& r) {
  return to_string(r.kind) + "," + std::to_string(r.channels) + "," + std::to_string(r.height) + "," +
         std::to_string(r.width) + "," + std::to_string(r.trials) + "," + std::to_string(r.threads) + "," +
         csv::format(r.mean_ms) + "," + csv::format(r.median_ms) + "," + csv::format(r.stddev_ms);
}

}  // namespace ufse
