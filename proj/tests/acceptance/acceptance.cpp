// End-to-end acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "grad_cases.hpp"
#include "oracles.hpp"
#include "ufse/bench.hpp"
#include "ufse/featstats.hpp"
#include "ufse/image.hpp"
#include "ufse/losses.hpp"
#include "ufse/prune.hpp"
#include "ufse/stylize.hpp"
#include "ufse/synth.hpp"
#include "ufse/trainer.hpp"
#include "ufse/transform.hpp"

using namespace ufse;
using TF = Tensor<float>;
using TD = Tensor<double>;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

class Timer {
 public:
  double wall_s() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_).count(); }
  double cpu_s() const { return static_cast<double>(std::clock() - cpu_) / CLOCKS_PER_SEC; }

 private:
  std::chrono::steady_clock::time_point wall_ = std::chrono::steady_clock::now();
  std::clock_t cpu_ = std::clock();
};

int failures = 0;

void report(int id, const std::string& name, Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "):" << o.detail.str()
            << std::endl;
  if (!o.pass) ++failures;
}

// Runs a criterion, turning any escaped exception into a failure.
void criterion(int id, const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  report(id, name, o);
}

oracle::Mat rows_of(const FeatureMap& f) {
  oracle::Mat m;
  for (std::int64_t i = 0; i < f.channels(); ++i) m.emplace_back(f.channel(i).begin(), f.channel(i).end());
  return m;
}

oracle::Mat rows_of(const TD& t) {
  const auto c = t.dim(1), l = t.dim(2) * t.dim(3);
  oracle::Mat m(static_cast<std::size_t>(c));
  for (std::int64_t i = 0; i < c; ++i) m[i].assign(t.data().begin() + i * l, t.data().begin() + (i + 1) * l);
  return m;
}

FeatureMap random_map(std::int64_t c, std::int64_t h, std::int64_t w, std::mt19937_64& rng) {
  std::normal_distribution<float> nd;
  FeatureMap f(c, h, w);
  for (auto& v : f.values()) v = nd(rng);
  return f;
}

// Lower-triangular channel mixing with offsets: correlated, full-rank features.
FeatureMap correlated_map(std::int64_t c, std::int64_t h, std::int64_t w, std::mt19937_64& rng) {
  FeatureMap base = random_map(c, h, w, rng);
  std::uniform_real_distribution<float> u(-1, 1);
  FeatureMap out(c, h, w);
  for (std::int64_t i = 0; i < c; ++i) {
    const float offset = 3 * u(rng);
    std::vector<float> mix(static_cast<std::size_t>(i + 1));
    for (std::int64_t j = 0; j <= i; ++j) mix[j] = j == i ? 1.5f : 0.5f * u(rng);
    for (std::int64_t k = 0; k < base.plane(); ++k) {
      float s = offset;
      for (std::int64_t j = 0; j <= i; ++j) s += mix[j] * base.channel(j)[k];
      out.channel(i)[k] = s;
    }
  }
  return out;
}

double max_abs_diff(const Matrix& a, const oracle::Mat& b) {
  double worst = 0;
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - b[i][j]));
  return worst;
}

double rel_frobenius(const oracle::Mat& a, const oracle::Mat& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) {
      num += (a[i][j] - b[i][j]) * (a[i][j] - b[i][j]);
      den += b[i][j] * b[i][j];
    }
  return std::sqrt(num / den);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << "command failed (" << code << "): " << err.str();
  return code;
}

double mean_tail(const std::vector<double>& v, std::size_t n) {
  const std::size_t k = std::min(n, v.size());
  double s = 0;
  for (std::size_t i = v.size() - k; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(k);
}

double mean_head(const std::vector<double>& v, std::size_t n) {
  const std::size_t k = std::min(n, v.size());
  double s = 0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s / static_cast<double>(k);
}

std::vector<double> column(const std::vector<LossReport>& h, double LossReport::*field) {
  std::vector<double> out;
  for (const auto& r : h) out.push_back(r.*field);
  return out;
}

// Desk-scale decorrelation experiment shared by criteria 4-6.
struct DeskRun {
  TrainResult treatment, control;
  double cpu_s = 0;
  std::vector<TF> probe_contents, probe_styles;
};

constexpr std::size_t kSmoothWindow = 100;

}  // namespace

int main() {
  keep_freed_memory();
  const fs::path work = fs::temp_directory_path() / "ufse_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  std::cout.setf(std::ios::fixed);
  std::cout.precision(6);

  criterion(1, "gradient suite", [](Outcome& o) {
    Timer t;
    double worst = 0;
    std::string worst_case;
    std::size_t checks = 0;
    for (const auto& c : gradcheck::all_cases()) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto built = c.build(seed);
        const auto res = gradcheck::check(built.f, built.inputs, 1e-3);
        ++checks;
        if (res.worst > worst) {
          worst = res.worst;
          worst_case = c.name;
        }
      }
    }
    o.detail << " " << checks << " checks, worst relative error " << worst << " (" << worst_case << "), "
             << t.wall_s() << " s";
    o.require(worst < 1e-3, "relative error < 1e-3");
    o.require(t.wall_s() < 120, "runtime < 2 min");
  });

  criterion(2, "oracle suite", [](Outcome& o) {
    Timer t;
    std::mt19937_64 rng(2);
    double corr = 0, gram_err = 0, cov = 0, unc = 0;
    for (int trial = 0; trial < 20; ++trial) {
      FeatureMap f = random_map(6, 4, 4, rng);
      corr = std::max(corr, max_abs_diff(channel_correlation(f).coefficients, oracle::correlation(rows_of(f))));
      gram_err = std::max(gram_err, max_abs_diff(gram(f), oracle::gram(rows_of(f))));
      cov = std::max(cov, max_abs_diff(covariance(f), oracle::covariance(rows_of(f))));
      std::normal_distribution<double> nd;
      std::vector<double> a(48), b(40);
      for (auto& v : a) v = nd(rng);
      for (auto& v : b) v = nd(rng);
      TD fc({1, 4, 3, 4}, a), fs_({1, 4, 2, 5}, b);
      for (bool absolute : {false, true}) {
        const double lib = uncorrelation_loss(fc, fs_, absolute ? UncorrelationMode::Absolute : UncorrelationMode::Signed).item();
        unc = std::max(unc, std::abs(lib - oracle::uncorrelation(rows_of(fc), rows_of(fs_), absolute)));
      }
    }
    std::uniform_real_distribution<double> u(0, 10);
    std::bernoulli_distribution zero(0.15);
    int minimal = 0, total = 0;
    for (std::size_t c = 1; c <= 12; ++c) {
      for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> m(c);
        for (auto& v : m) v = zero(rng) ? 0.0 : u(rng);
        if (c > 1 && trial % 5 == 0) m[c - 1] = m[0];  // exercise ties
        m[0] = m[0] == 0 ? 1 : m[0];
        for (double fraction : {0.5, 0.8, 1.0}) {
          ++total;
          minimal += oracle::keep_set_is_minimal(m, fraction, select_keep_fraction(m, fraction));
        }
      }
    }
    o.detail << " correlation " << corr << ", gram " << gram_err << ", covariance " << cov << ", uncorrelation "
             << unc << ", keep-fraction minimal " << minimal << "/" << total << ", " << t.wall_s() << " s";
    o.require(corr < 1e-6, "correlation within 1e-6");
    o.require(gram_err < 1e-5, "gram within 1e-5");
    o.require(cov < 1e-6, "covariance within 1e-6");
    o.require(unc < 1e-6, "uncorrelation within 1e-6");
    o.require(minimal == total, "keep-fraction minimal for every C <= 12 case");
    o.require(t.wall_s() < 60, "runtime < 1 min");
  });

  criterion(3, "alignment contracts", [](Outcome& o) {
    Timer t;
    std::mt19937_64 rng(3);
    double moments = 0, cov = 0, self = 0;
    for (int trial = 0; trial < 10; ++trial) {
      FeatureMap c = correlated_map(16, 8, 8, rng), s = correlated_map(16, 6, 9, rng);
      const auto mo = channel_mean_std(adain(c, s)), ms = channel_mean_std(s);
      for (std::size_t i = 0; i < ms.mean.size(); ++i) {
        moments = std::max({moments, std::abs(mo.mean[i] - ms.mean[i]), std::abs(mo.stddev[i] - ms.stddev[i])});
      }
      cov = std::max(cov, rel_frobenius(oracle::covariance(rows_of(whiten_color(c, s))), oracle::covariance(rows_of(s))));
      FeatureMap back = whiten_color(c, c);
      for (std::size_t k = 0; k < c.values().size(); ++k) self = std::max(self, static_cast<double>(std::abs(back.values()[k] - c.values()[k])));
    }
    o.detail << " AdaIN moment error " << moments << ", WCT covariance relative error " << cov
             << ", WCT self-alignment error " << self << ", " << t.wall_s() << " s";
    o.require(moments < 1e-4, "AdaIN moments within 1e-4");
    o.require(cov < 1e-3, "WCT covariance within 1e-3");
    o.require(self < 1e-3, "WCT self-alignment within 1e-3");
    o.require(t.wall_s() < 60, "runtime < 1 min");
  });

  // Criteria 4-6 share one treatment/control pair.
  DeskRun desk;
  std::string desk_error;
  try {
    const fs::path data = work / "desk";
    write_synth_dataset(data.string(), 200, 80, 3);
    for (int i = 0; i < 16; ++i) {
      desk.probe_contents.push_back(synth_content_image(64, 64, 900000 + i));
      desk.probe_styles.push_back(synth_style_image(64, 64, 950000 + i));
    }
    TrainConfig cfg;
    cfg.content_dir = (data / "content").string();
    cfg.style_dir = (data / "style").string();
    cfg.iterations = 2000;
    cfg.network.widths = {16, 32, 64};
    cfg.crop = 64;
    cfg.weights = LossWeights{1.0, 50.0, 0.01};
    TrainConfig control_cfg = cfg;
    control_cfg.weights.uncorrelation = 0.0;
    Timer t;
    auto progress = [](const char* label) {
      return [label](const LossReport& r) {
        if (r.iteration % 500 == 0) std::cerr << label << " iteration " << r.iteration << "\n";
      };
    };
    desk.treatment = train(cfg, progress("treatment"));
    desk.control = train(control_cfg, progress("control"));
    desk.cpu_s = t.cpu_s();
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  auto need_desk = [&] {
    if (!desk_error.empty()) throw std::runtime_error("desk training failed: " + desk_error);
  };

  criterion(4, "decorrelation training", [&](Outcome& o) {
    need_desk();
    const auto unc = smoothed(column(desk.treatment.history, &LossReport::uncorrelation), kSmoothWindow);
    const double initial = mean_head(column(desk.treatment.history, &LossReport::uncorrelation), kSmoothWindow);
    const double final_ = unc.back();
    const Network init = build_encoder(NetworkConfig{}, 1);
    const auto before = probe_statistics(init, desk.probe_contents, desk.probe_styles);
    const auto treat = probe_statistics(desk.treatment.net.encoder, desk.probe_contents, desk.probe_styles);
    const auto ctrl = probe_statistics(desk.control.net.encoder, desk.probe_contents, desk.probe_styles);
    o.detail << " smoothed uncorrelation " << initial << " -> " << final_ << " (" << 100 * final_ / initial
             << "%), probe mean |offdiag| initial " << before.mean_abs_off_diagonal << ", treatment "
             << treat.mean_abs_off_diagonal << ", control " << ctrl.mean_abs_off_diagonal << ", CPU " << desk.cpu_s
             << " s";
    o.require(final_ <= 0.1 * initial, "final smoothed uncorrelation <= 10% of initial");
    o.require(treat.mean_abs_off_diagonal < 0.1, "probe mean |offdiag| < 0.1");
    o.require(treat.mean_abs_off_diagonal < before.mean_abs_off_diagonal, "below the initial encoder");
    o.require(treat.mean_abs_off_diagonal < ctrl.mean_abs_off_diagonal, "below the control");
    o.require(desk.cpu_s <= 1200, "runtime <= 20 min CPU");
  });

  criterion(5, "quality preservation", [&](Outcome& o) {
    need_desk();
    const double st = smoothed(column(desk.treatment.history, &LossReport::style), kSmoothWindow).back();
    const double sc = smoothed(column(desk.control.history, &LossReport::style), kSmoothWindow).back();
    const double ct = smoothed(column(desk.treatment.history, &LossReport::content), kSmoothWindow).back();
    const double cc = smoothed(column(desk.control.history, &LossReport::content), kSmoothWindow).back();
    const double ds = std::abs(st - sc) / sc, dc = std::abs(ct - cc) / cc;
    o.detail << " final style " << st << " vs control " << sc << " (" << 100 * ds << "%), final content " << ct
             << " vs control " << cc << " (" << 100 * dc << "%)";
    o.require(ds <= 0.15, "style within 15% of control");
    o.require(dc <= 0.25, "content within 25% of control");
  });

  criterion(6, "channel redundancy", [&](Outcome& o) {
    need_desk();
    Timer t;
    const Network init = build_encoder(NetworkConfig{}, 1);
    const double d0 = probe_statistics(init, desk.probe_contents, desk.probe_styles).diagonal_sum;
    const double d1 = probe_statistics(desk.treatment.net.encoder, desk.probe_contents, desk.probe_styles).diagonal_sum;
    PruneSweepOptions opt;
    opt.steps = even_steps(desk.treatment.net.encoder.output_channels(), 16);
    const PruneReport rep = prune_sweep(desk.treatment.net, desk.probe_contents, desk.probe_styles, opt);
    const double base = rep.steps.front().style_loss;
    const double keep = std::abs(rep.keep_fraction.style_loss - base) / base;
    const double all = (rep.steps.back().style_loss - base) / base;
    o.detail << " D " << d0 << " -> " << d1 << ", keep-80% style change " << 100 * keep << "% (~"
             << rep.keep_fraction.eliminated << " channels eliminated), all-eliminated style change " << 100 * all
             << "%, " << t.wall_s() << " s";
    o.require(d1 < d0, "D decreases");
    o.require(keep < 0.05, "keep-80% style change < 5%");
    o.require(all > 0.5, "eliminating all channels raises style loss > 50%");
    o.require(t.wall_s() < 300, "runtime < 5 min");
  });

  criterion(7, "performance ordering", [](Outcome& o) {
    Timer t;
    const auto a256 = bench_alignment(AlignmentKind::AdaIN, 256, 60, 60, 100);
    const auto w256 = bench_alignment(AlignmentKind::WCT, 256, 60, 60, 100);
    const auto a32 = bench_alignment(AlignmentKind::AdaIN, 32, 60, 60, 100);
    const auto w32 = bench_alignment(AlignmentKind::WCT, 32, 60, 60, 100);
    const double r256 = w256.mean_ms / a256.mean_ms, r32 = w32.mean_ms / a32.mean_ms;
    o.detail << " C=256: WCT " << w256.mean_ms << " ms vs AdaIN " << a256.mean_ms << " ms (ratio " << r256
             << "), C=32 ratio " << r32 << ", " << t.wall_s() << " s";
    o.require(w256.mean_ms > a256.mean_ms, "WCT slower than AdaIN at C=256");
    o.require(r256 > r32, "ratio grows with C");
    o.require(t.wall_s() < 120, "runtime < 2 min");
  });

  criterion(8, "end-to-end determinism", [&](Outcome& o) {
    const fs::path root = work / "e2e";
    const std::string data = (root / "data").string();
    if (cli({"synth", "-o", data, "--count", "8", "--size", "72", "--seed", "5"}) != 0) throw std::runtime_error("synth failed");
    const std::vector<std::string> smoke{"train", "--content-dir", data + "/content", "--style-dir", data + "/style",
                                         "--iterations", "20", "--batch-size", "2", "--seed", "9", "-o"};
    const std::string content = data + "/content/00000.png", style = data + "/style/00003.png";
    for (const char* run : {"run1", "run2"}) {
      auto args = smoke;
      args.push_back((root / run).string());
      if (cli(args) != 0) throw std::runtime_error("smoke training failed");
      if (cli({"stylize", "-c", (root / run).string(), "--content", content, "--style", style, "-o",
               (root / (std::string(run) + ".png")).string(), "--alpha", "0.8"}) != 0)
        throw std::runtime_error("stylize failed");
    }
    bool same = true;
    for (const char* f : {"encoder.ufse", "decoder.ufse", "lossnet.ufse", "history.csv"}) {
      const auto a = read_file(root / "run1" / f), b = read_file(root / "run2" / f);
      same = same && !a.empty() && a == b;
    }
    const auto img1 = read_file(root / "run1.png"), img2 = read_file(root / "run2.png");
    const bool same_image = !img1.empty() && img1 == img2;

    const std::string cascade = (root / "cascade").string();
    if (cli({"train-cascade", "--content-dir", data + "/content", "--style-dir", data + "/style", "--iterations", "20",
             "--batch-size", "2", "--seed", "9", "-o", cascade}) != 0)
      throw std::runtime_error("cascade training failed");
    std::vector<StyleNetwork> nets;
    for (int k = 1; k <= 3; ++k) nets.push_back(load_style_network(cascade + "/stage" + std::to_string(k)));
    const TF c = image_read(content), s = image_read(style);
    std::vector<TF> stages;
    stylize_cascade(nets, c, s, {}, &stages);
    std::vector<double> deltas;
    const TF* prev = &c;
    for (const auto& st : stages) {
      double d = 0;
      for (std::int64_t k = 0; k < st.numel(); ++k) d += std::abs(st.data()[k] - prev->data()[k]);
      deltas.push_back(d / static_cast<double>(st.numel()));
      prev = &st;
    }
    o.detail << " checkpoints/history identical " << (same ? "yes" : "no") << ", stylized PNG identical "
             << (same_image ? "yes" : "no") << ", cascade mean |delta| per stage";
    for (double d : deltas) o.detail << " " << d;
    o.require(same, "bit-identical checkpoints and history");
    o.require(same_image, "bit-identical stylized image");
    o.require(deltas.size() == 3 && std::all_of(deltas.begin(), deltas.end(), [](double d) { return d > 0; }),
              "nonzero delta at every cascade stage");
  });

  fs::remove_all(work);
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
