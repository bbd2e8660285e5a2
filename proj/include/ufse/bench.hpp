#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ufse/transform.hpp"

namespace ufse {

struct BenchResult {
  AlignmentKind kind = AlignmentKind::AdaIN;
  std::int64_t channels = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  int trials = 0;
  int threads = 1;
  double mean_ms = 0;
  double median_ms = 0;
  double stddev_ms = 0;
};

struct BenchOptions {
  int warmup = 10;
  std::uint64_t seed = 7;
  // Worker threads running trials concurrently; 1 keeps timings clean.
  int threads = 1;
};

// Wall-clock statistics of align(kind, content, style) alone. Inputs are
// allocated up front and refilled with fresh random values before every
// trial; the refill is not timed, nor are the warm-up trials.
BenchResult bench_alignment(AlignmentKind kind, std::int64_t channels, std::int64_t height, std::int64_t width,
                            int trials, const BenchOptions& options = {});

std::string bench_csv_header();
std::string bench_csv_row(const BenchResult& r);

}  // namespace ufse
