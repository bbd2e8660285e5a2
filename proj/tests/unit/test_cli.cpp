#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "ufse/image.hpp"
#include "ufse/losses.hpp"
#include "ufse/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = ufse::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// One dataset and one smoke checkpoint shared by every case.
struct Fixture {
  fs::path root = fs::temp_directory_path() / "ufse_cli_test";
  std::string data = (root / "data").string();
  std::string ckpt = (root / "ckpt").string();
  std::string content = (root / "data/content/00000.png").string();
  std::string style = (root / "data/style/00000.png").string();

  Fixture() {
    fs::remove_all(root);
    REQUIRE(run({"synth", "-o", data, "--count", "4", "--size", "40", "--seed", "2"}).code == 0);
    REQUIRE(run({"train", "--content-dir", data + "/content", "--style-dir", data + "/style", "-o", ckpt,
                 "--iterations", "2", "--batch-size", "1", "--resize", "40", "--crop", "32"})
                .code == 0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("help and unknown input") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  const Run r = run({"bench", "--no-such-flag"});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("train with a config file and an iteration override") {
  auto& f = fixture();
  const auto cfg_path = (f.root / "x.json").string();
  const auto out_dir = (f.root / "cfg_run").string();
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({"content_dir": ")" << f.data << R"(/content", "style_dir": ")" << f.data
        << R"(/style", "iterations": 50, "batch_size": 1, "resize": 40, "crop": 32, "output_dir": ")" << out_dir
        << R"("})";
  }
  const Run r = run({"train", "--config", cfg_path, "--iterations", "5"});
  CHECK(r.code == 0);
  CHECK(ufse::read_loss_history(out_dir + "/history.csv").size() == 5);
}

TEST_CASE("bad configuration exits with code 2") {
  auto& f = fixture();
  const auto cfg_path = (f.root / "bad.json").string();
  { std::ofstream(cfg_path) << R"({"iterations": 5, "learning_rate": 1})"; }
  CHECK(run({"train", "--config", cfg_path}).code == 2);
  CHECK(run({"train", "--config", (f.root / "missing.json").string()}).code == 2);
  CHECK(run({"train", "--content-dir", (f.root / "nowhere").string(), "--style-dir", f.data + "/style"}).code == 2);
}

TEST_CASE("stylize rejects alpha outside the unit interval") {
  auto& f = fixture();
  for (const char* alpha : {"1.5", "-0.2"}) {
    const Run r = run({"stylize", "-c", f.ckpt, "--content", f.content, "--style", f.style, "-o",
                       (f.root / "bad.png").string(), "--alpha", alpha});
    CHECK(r.code == 2);
    CHECK(r.err.find("--alpha") != std::string::npos);
  }
  const Run prune = run({"stylize", "-c", f.ckpt, "--content", f.content, "--style", f.style, "-o",
                         (f.root / "bad.png").string(), "--prune-fraction", "0"});
  CHECK(prune.code == 2);
  CHECK(prune.err.find("--prune-fraction") != std::string::npos);
}

TEST_CASE("stylize writes an image of the content's size, reproducibly") {
  auto& f = fixture();
  const auto a = (f.root / "a.png").string(), b = (f.root / "b.png").string();
  const std::vector<std::string> base{"stylize", "-c", f.ckpt, "--content", f.content, "--style", f.style, "-o"};
  auto with = [&](std::string out, std::vector<std::string> extra) {
    auto args = base;
    args.push_back(std::move(out));
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  };
  REQUIRE(with(a, {"--alpha", "0.7"}).code == 0);
  REQUIRE(with(b, {"--alpha", "0.7"}).code == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(ufse::image_read(a).dims() == ufse::image_read(f.content).dims());
  CHECK(with(b, {"--prune-fraction", "0.8"}).code == 0);
  CHECK(with(b, {"-c", f.ckpt}).code == 2);  // two checkpoints without --cascade
}

TEST_CASE("missing runtime inputs exit with code 1 or 2") {
  auto& f = fixture();
  const auto empty = (f.root / "empty_ckpt").string();
  fs::create_directories(empty);
  CHECK(run({"stylize", "-c", empty, "--content", f.content, "--style", f.style, "-o", (f.root / "x.png").string()})
            .code == 1);
  CHECK(run({"stylize", "-c", f.ckpt, "--content", (f.root / "nope.png").string(), "--style", f.style, "-o",
             (f.root / "x.png").string()})
            .code == 2);
}

TEST_CASE("analyze reports statistics and exports") {
  auto& f = fixture();
  const auto heat = (f.root / "heat.png").string(), csv = (f.root / "corr.csv").string();
  const Run r = run({"analyze", "-c", f.ckpt, "--content", f.content, "--style", f.style, "--heatmap", heat, "--csv", csv});
  CHECK(r.code == 0);
  CHECK(r.out.find("channels 64") != std::string::npos);
  CHECK(r.out.find("normalized_diagonal_sum") != std::string::npos);
  CHECK(fs::exists(heat));
  CHECK(fs::exists(csv));
  CHECK(run({"analyze", "--encoder", f.ckpt + "/encoder.ufse", "--content", f.content}).code == 0);
  CHECK(run({"analyze", "--content", f.content}).code == 2);
}

TEST_CASE("prune sweep writes its CSV, grid and export") {
  auto& f = fixture();
  const auto csv = (f.root / "sweep.csv").string(), grid = (f.root / "grid.png").string();
  const auto exported = (f.root / "pruned").string();
  const Run r = run({"prune-sweep", "-c", f.ckpt, "--content-dir", f.data + "/content", "--style-dir",
                     f.data + "/style", "--pairs", "2", "--steps", "4", "--resize", "40", "--crop", "32", "--csv", csv,
                     "--grid", grid, "--export", exported});
  CHECK(r.code == 0);
  std::ifstream in(csv);
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 6);  // header plus 0, 16, 32, 48, 64 eliminated
  CHECK(fs::exists(grid));
  CHECK(run({"stylize", "-c", exported, "--content", f.content, "--style", f.style, "-o",
             (f.root / "pruned.png").string()})
            .code == 0);
}

TEST_CASE("bench prints one row per kind and channel count") {
  const Run r = run({"bench", "--channels", "4", "8", "--height", "6", "--width", "6", "--trials", "3", "--warmup", "1"});
  CHECK(r.code == 0);
  std::istringstream lines(r.out);
  int n = 0;
  for (std::string line; std::getline(lines, line);) ++n;
  CHECK(n == 5);
  CHECK(run({"bench", "--kind", "fft"}).code == 2);
  CHECK(run({"bench", "--trials", "0"}).code == 2);
}

TEST_CASE("cascade training and stylization") {
  auto& f = fixture();
  const auto dir = (f.root / "cascade").string();
  REQUIRE(run({"train-cascade", "--content-dir", f.data + "/content", "--style-dir", f.data + "/style", "-o", dir,
               "--iterations", "1", "--batch-size", "1", "--resize", "40", "--crop", "32"})
              .code == 0);
  const auto stages = (f.root / "stages").string();
  CHECK(run({"stylize", "--cascade", "-c", dir + "/stage1", "-c", dir + "/stage2", "-c", dir + "/stage3",
             "--content", f.content, "--style", f.style, "-o", (f.root / "cascade.png").string(), "--stages-dir",
             stages})
            .code == 0);
  CHECK(fs::exists(stages + "/stage3.png"));
  CHECK(run({"train-cascade", "--content-dir", f.data + "/content", "--style-dir", f.data + "/style", "-o", dir,
             "--stages", "4"})
            .code == 2);
}
