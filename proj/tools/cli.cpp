#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>

#include "ufse/bench.hpp"
#include "ufse/dataset.hpp"
#include "ufse/featstats.hpp"
#include "ufse/image.hpp"
#include "ufse/prune.hpp"
#include "ufse/stylize.hpp"
#include "ufse/synth.hpp"
#include "ufse/trainer.hpp"

namespace ufse {

namespace {

namespace fs = std::filesystem;

// Flags that override TrainConfig fields after an optional JSON file loads.
struct TrainFlags {
  std::string config;
  std::optional<std::string> content_dir, style_dir, output_dir, mode, encoder_init;
  std::optional<int> iterations, epochs, batch_size, crop, resize, log_every;
  std::optional<double> lr_decoder, lr_encoder, lambda_content, lambda_style, lambda_uncorrelation;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON train config")->check(CLI::ExistingFile);
    app->add_option("--content-dir", content_dir, "directory of content images");
    app->add_option("--style-dir", style_dir, "directory of style images");
    app->add_option("-o,--output", output_dir, "checkpoint directory");
    app->add_option("--iterations", iterations)->check(CLI::PositiveNumber);
    app->add_option("--epochs", epochs)->check(CLI::NonNegativeNumber);
    app->add_option("--batch-size", batch_size)->check(CLI::PositiveNumber);
    app->add_option("--crop", crop)->check(CLI::PositiveNumber);
    app->add_option("--resize", resize)->check(CLI::PositiveNumber);
    app->add_option("--log-every", log_every)->check(CLI::PositiveNumber);
    app->add_option("--lr-decoder", lr_decoder)->check(CLI::PositiveNumber);
    app->add_option("--lr-encoder", lr_encoder)->check(CLI::PositiveNumber);
    app->add_option("--lambda-content", lambda_content)->check(CLI::NonNegativeNumber);
    app->add_option("--lambda-style", lambda_style)->check(CLI::NonNegativeNumber);
    app->add_option("--lambda-uncorrelation", lambda_uncorrelation)->check(CLI::NonNegativeNumber);
    app->add_option("--mode", mode, "uncorrelation mode")->check(CLI::IsMember({"signed", "absolute"}));
    app->add_option("--seed", seed);
    app->add_option("--encoder-init", encoder_init, "encoder checkpoint to start from")->check(CLI::ExistingFile);
  }

  TrainConfig resolve() const {
    TrainConfig cfg = config.empty() ? TrainConfig{} : load_train_config(config);
    if (content_dir) cfg.content_dir = *content_dir;
    if (style_dir) cfg.style_dir = *style_dir;
    if (output_dir) cfg.output_dir = *output_dir;
    if (iterations) {
      cfg.iterations = *iterations;
      if (!epochs) cfg.epochs = 0;
    }
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (crop) cfg.crop = *crop;
    if (resize) cfg.resize = *resize;
    if (log_every) cfg.log_every = *log_every;
    if (lr_decoder) cfg.lr_decoder = *lr_decoder;
    if (lr_encoder) cfg.lr_encoder = *lr_encoder;
    if (lambda_content) cfg.weights.content = *lambda_content;
    if (lambda_style) cfg.weights.style = *lambda_style;
    if (lambda_uncorrelation) cfg.weights.uncorrelation = *lambda_uncorrelation;
    if (mode) cfg.uncorrelation_mode = parse_uncorrelation_mode(*mode);
    if (seed) cfg.seed = *seed;
    if (encoder_init) cfg.encoder_init = *encoder_init;
    cfg.validate();
    return cfg;
  }
};

ProgressFn progress_to(std::ostream& err) {
  return [&err](const LossReport& r) {
    err << "iter " << r.iteration << "  content " << r.content << "  style " << r.style << "  uncorrelation "
        << r.uncorrelation << "  total " << r.total << "\n";
  };
}

// First `count` images of a directory, resized and cropped with a seeded rng.
std::vector<Tensor<float>> load_probe(const std::string& dir, int count, int resize, int crop, std::uint64_t seed) {
  ImageDataset ds(dir, resize);
  std::mt19937_64 rng(seed);
  std::vector<Tensor<float>> out;
  for (std::size_t i = 0; i < ds.size() && static_cast<int>(i) < count; ++i) out.push_back(ds.sample(i, crop, rng));
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Style transfer with decorrelated features", "ufse"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train one encoder/decoder pair");
  train_flags.attach(train_cmd);

  TrainFlags cascade_flags;
  int cascade_stages = 3;
  auto* cascade_cmd = app.add_subcommand("train-cascade", "train one network per style scale");
  cascade_flags.attach(cascade_cmd);
  cascade_cmd->add_option("--stages", cascade_stages, "number of scales (style taps used by the last stage)")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> checkpoints;
  std::string content_path, style_path, output_path, stages_dir;
  double alpha = 1.0;
  std::optional<double> prune_fraction;
  bool cascade = false;
  auto* stylize_cmd = app.add_subcommand("stylize", "stylize a content image");
  stylize_cmd->add_option("-c,--checkpoint", checkpoints, "checkpoint directory (one per cascade stage)")
      ->required()
      ->check(CLI::ExistingDirectory);
  stylize_cmd->add_option("--content", content_path)->required()->check(CLI::ExistingFile);
  stylize_cmd->add_option("--style", style_path)->required()->check(CLI::ExistingFile);
  stylize_cmd->add_option("-o,--output", output_path)->required();
  stylize_cmd->add_option("--alpha", alpha, "style strength in [0, 1]")->check(CLI::Range(0.0, 1.0));
  stylize_cmd->add_option("--prune-fraction", prune_fraction, "keep this fraction of channel magnitude")
      ->check(CLI::Range(0.0, 1.0));
  stylize_cmd->add_flag("--cascade", cascade, "chain the checkpoints, feeding each output to the next");
  stylize_cmd->add_option("--stages-dir", stages_dir, "write every cascade stage's output here");

  std::string analyze_ckpt, analyze_encoder, heatmap_path, csv_path;
  std::string analyze_content, analyze_style;
  int heatmap_scale = 8;
  auto* analyze_cmd = app.add_subcommand("analyze", "correlation statistics of encoded features");
  auto* ck_opt = analyze_cmd->add_option("-c,--checkpoint", analyze_ckpt)->check(CLI::ExistingDirectory);
  analyze_cmd->add_option("--encoder", analyze_encoder, "encoder checkpoint file")
      ->check(CLI::ExistingFile)
      ->excludes(ck_opt);
  analyze_cmd->add_option("--content", analyze_content)->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--style", analyze_style, "defaults to the content image")->check(CLI::ExistingFile);
  analyze_cmd->add_option("--heatmap", heatmap_path, "PNG of |r| for the content feature");
  analyze_cmd->add_option("--csv", csv_path, "correlation matrix CSV");
  analyze_cmd->add_option("--scale", heatmap_scale, "heatmap pixels per entry")->check(CLI::PositiveNumber);

  std::string sweep_ckpt, sweep_content, sweep_style, sweep_csv, sweep_grid, sweep_export;
  int sweep_pairs = 8, sweep_steps = 16, sweep_resize = 80, sweep_crop = 64;
  double sweep_fraction = 0.8;
  std::uint64_t sweep_seed = 11;
  auto* sweep_cmd = app.add_subcommand("prune-sweep", "style/content loss as channels are eliminated");
  sweep_cmd->add_option("-c,--checkpoint", sweep_ckpt)->required()->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--content-dir", sweep_content)->required()->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--style-dir", sweep_style)->required()->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--pairs", sweep_pairs)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--steps", sweep_steps, "number of elimination increments")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--fraction", sweep_fraction, "keep-fraction of channel magnitude")
      ->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--resize", sweep_resize)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--crop", sweep_crop)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--seed", sweep_seed);
  sweep_cmd->add_option("--csv", sweep_csv)->required();
  sweep_cmd->add_option("--grid", sweep_grid, "PNG grid of decoded outputs for the first pair");
  sweep_cmd->add_option("--export", sweep_export, "write a structurally pruned checkpoint directory");

  std::string bench_kind = "both", bench_csv;
  std::vector<int> bench_channels{32, 256};
  int bench_height = 60, bench_width = 60, bench_trials = 100, bench_warmup = 10, bench_threads = 1;
  auto* bench_cmd = app.add_subcommand("bench", "time AdaIN against WCT");
  bench_cmd->add_option("--kind", bench_kind)->check(CLI::IsMember({"adain", "wct", "both"}));
  bench_cmd->add_option("--channels", bench_channels)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--height", bench_height)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--width", bench_width)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--trials", bench_trials)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--warmup", bench_warmup)->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--threads", bench_threads, "concurrent trial workers (results are labeled)")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--csv", bench_csv);

  std::string synth_dir;
  int synth_count = 200, synth_size = 80;
  std::uint64_t synth_seed = 1;
  auto* synth_cmd = app.add_subcommand("synth", "write a procedural content/style dataset");
  synth_cmd->add_option("-o,--output", synth_dir)->required();
  synth_cmd->add_option("--count", synth_count)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", synth_size, "shorter image side")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) {
      const TrainConfig cfg = train_flags.resolve();
      const TrainResult r = train(cfg, progress_to(err));
      err << "trained " << r.history.size() << " iterations"
          << (cfg.output_dir.empty() ? "" : ", checkpoints in " + cfg.output_dir) << "\n";
    } else if (cascade_cmd->parsed()) {
      const TrainConfig base = cascade_flags.resolve();
      if (base.output_dir.empty()) throw UsageError("train-cascade requires --output");
      if (static_cast<std::size_t>(cascade_stages) > base.network.style_taps.size()) {
        throw UsageError("--stages exceeds the " + std::to_string(base.network.style_taps.size()) +
                         " configured style taps");
      }
      std::vector<TrainConfig> cfgs;
      for (int k = 1; k <= cascade_stages; ++k) {
        TrainConfig c = base;
        c.network.style_taps.assign(base.network.style_taps.begin(), base.network.style_taps.begin() + k);
        c.output_dir = (fs::path(base.output_dir) / ("stage" + std::to_string(k))).string();
        c.seed = base.seed + static_cast<std::uint64_t>(k - 1) * 1000;
        cfgs.push_back(c);
      }
      train_cascade(cfgs, progress_to(err));
      err << "trained " << cfgs.size() << " cascade stages under " << base.output_dir << "\n";
    } else if (stylize_cmd->parsed()) {
      if (checkpoints.size() > 1 && !cascade) throw UsageError("several --checkpoint values require --cascade");
      StylizeOptions opts;
      opts.alpha = alpha;
      if (prune_fraction) {
        if (*prune_fraction <= 0.0) throw UsageError("--prune-fraction must be greater than 0");
        opts.prune_fraction = prune_fraction;
      }
      std::vector<StyleNetwork> nets;
      for (const auto& c : checkpoints) nets.push_back(load_style_network(c));
      const Tensor<float> content = image_read(content_path), style = image_read(style_path);
      std::vector<Tensor<float>> stages;
      const Tensor<float> result = stylize_cascade(nets, content, style, opts, &stages);
      image_write(output_path, result);
      if (!stages_dir.empty()) {
        fs::create_directories(stages_dir);
        for (std::size_t k = 0; k < stages.size(); ++k) {
          image_write((fs::path(stages_dir) / ("stage" + std::to_string(k + 1) + ".png")).string(), stages[k]);
        }
      }
    } else if (analyze_cmd->parsed()) {
      Network encoder;
      if (!analyze_ckpt.empty()) {
        encoder = load_style_network(analyze_ckpt).encoder;
      } else if (!analyze_encoder.empty()) {
        encoder = load_network(analyze_encoder, NetworkRole::Encoder);
      } else {
        throw UsageError("analyze needs --checkpoint or --encoder");
      }
      const std::int64_t f = encoder.config().downsampling_factor();
      const Tensor<float> c = reflect_pad_to(image_read(analyze_content), f);
      const Tensor<float> s = analyze_style.empty() ? c : reflect_pad_to(image_read(analyze_style), f);
      NoGradGuard no_grad;
      const FeatureMap fc = FeatureMap::from_tensor(encode_content(encoder, c));
      const FeatureMap fs_ = FeatureMap::from_tensor(encode_content(encoder, s));
      const CorrelationMatrix r = channel_correlation(fc);
      out << "channels " << fc.channels() << "\n";
      out << "mean_abs_off_diagonal " << r.mean_abs_off_diagonal() << "\n";
      out << "normalized_diagonal_sum " << normalized_diagonal_sum(fc, fs_) << "\n";
      if (!heatmap_path.empty()) write_correlation_heatmap(heatmap_path, r, heatmap_scale);
      if (!csv_path.empty()) write_matrix_csv(csv_path, r.coefficients);
    } else if (sweep_cmd->parsed()) {
      if (sweep_fraction <= 0.0) throw UsageError("--fraction must be greater than 0");
      if (sweep_crop > sweep_resize) throw UsageError("--crop exceeds --resize");
      const StyleNetwork net = load_style_network(sweep_ckpt);
      const auto contents = load_probe(sweep_content, sweep_pairs, sweep_resize, sweep_crop, sweep_seed);
      const auto styles = load_probe(sweep_style, sweep_pairs, sweep_resize, sweep_crop, sweep_seed + 1);
      const std::size_t n = std::min(contents.size(), styles.size());
      const std::vector<Tensor<float>> cs(contents.begin(), contents.begin() + n), ss(styles.begin(), styles.begin() + n);
      PruneSweepOptions opts;
      opts.steps = even_steps(net.encoder.output_channels(), sweep_steps);
      opts.fraction = sweep_fraction;
      opts.capture_images = !sweep_grid.empty();
      std::vector<Tensor<float>> images;
      const PruneReport report = prune_sweep(net, cs, ss, opts, &images);
      write_prune_csv(sweep_csv, report);
      if (!sweep_grid.empty()) image_write(sweep_grid, image_grid(images, 6));
      out << "baseline_style_loss " << report.steps.front().style_loss << "\n";
      out << "keep_fraction_style_loss " << report.keep_fraction.style_loss << " (eliminated ~"
          << report.keep_fraction.eliminated << " of " << report.channels << ")\n";
      out << "all_eliminated_style_loss " << report.steps.back().style_loss << "\n";
      if (!sweep_export.empty()) {
        save_style_network(sweep_export, prune_structural(net, report.keep_set));
        out << "exported " << report.keep_set.size() << "-channel network to " << sweep_export << "\n";
      }
    } else if (bench_cmd->parsed()) {
      std::vector<AlignmentKind> kinds;
      if (bench_kind != "wct") kinds.push_back(AlignmentKind::AdaIN);
      if (bench_kind != "adain") kinds.push_back(AlignmentKind::WCT);
      BenchOptions opts;
      opts.warmup = bench_warmup;
      opts.threads = bench_threads;
      std::ofstream csv;
      if (!bench_csv.empty()) {
        csv.open(bench_csv);
        if (!csv) throw IoError("cannot write " + bench_csv);
        csv << bench_csv_header() << "\n";
      }
      out << bench_csv_header() << "\n";
      for (int c : bench_channels) {
        for (auto k : kinds) {
          const BenchResult r = bench_alignment(k, c, bench_height, bench_width, bench_trials, opts);
          out << bench_csv_row(r) << "\n";
          if (csv) csv << bench_csv_row(r) << "\n";
        }
      }
    } else if (synth_cmd->parsed()) {
      write_synth_dataset(synth_dir, synth_count, synth_size, synth_seed);
      err << "wrote " << synth_count << " content and style images under " << synth_dir << "\n";
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ufse
