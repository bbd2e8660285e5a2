#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ufse/bench.hpp"

using namespace ufse;

TEST_CASE("AdaIN timings are positive and finite") {
  const BenchResult r = bench_alignment(AlignmentKind::AdaIN, 64, 32, 32, 100);
  CHECK(r.trials == 100);
  CHECK(r.threads == 1);
  CHECK(r.channels == 64);
  CHECK((r.mean_ms > 0 && std::isfinite(r.mean_ms)));
  CHECK((r.median_ms > 0 && std::isfinite(r.median_ms)));
  CHECK((r.stddev_ms >= 0 && std::isfinite(r.stddev_ms)));
}

TEST_CASE("threaded runs are labeled and still complete every trial") {
  BenchOptions opt;
  opt.threads = 2;
  opt.warmup = 2;
  const BenchResult r = bench_alignment(AlignmentKind::WCT, 8, 8, 8, 10, opt);
  CHECK(r.threads == 2);
  CHECK(r.trials == 10);
  CHECK(r.mean_ms > 0);
  CHECK(bench_csv_row(r).find(",2,") != std::string::npos);
}

TEST_CASE("bench rejects empty runs") {
  CHECK_THROWS_AS(bench_alignment(AlignmentKind::AdaIN, 4, 4, 4, 0), UsageError);
  CHECK_THROWS_AS(bench_alignment(AlignmentKind::AdaIN, 4, 1, 1, 5), UsageError);
}

TEST_CASE("CSV header and rows have matching columns") {
  const BenchResult r = bench_alignment(AlignmentKind::AdaIN, 4, 4, 4, 3);
  auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  CHECK(count(bench_csv_header()) == count(bench_csv_row(r)));
  CHECK(bench_csv_row(r).rfind("adain,4,", 0) == 0);
}
