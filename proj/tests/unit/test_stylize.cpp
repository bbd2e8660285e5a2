#include <doctest.h>

#include <filesystem>

#include "ufse/stylize.hpp"
#include "ufse/synth.hpp"
#include "ufse/transform.hpp"

using namespace ufse;
using TF = Tensor<float>;
namespace fs = std::filesystem;

namespace {

StyleNetwork small_network(std::uint64_t seed) {
  NetworkConfig cfg;
  cfg.widths = {6, 10};
  cfg.content_tap = "relu2_2";
  cfg.style_taps = {"relu1_2", "relu2_2"};
  StyleNetwork net;
  net.encoder = build_encoder(cfg, seed);
  net.decoder = build_decoder(cfg, seed + 1);
  net.loss_net = snapshot_frozen(net.encoder);
  return net;
}

bool identical(const TF& a, const TF& b) {
  return a.dims() == b.dims() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_CASE("alpha zero decodes the content feature exactly") {
  StyleNetwork net = small_network(1);
  TF content = synth_content_image(16, 20, 1), style = synth_style_image(16, 16, 2);
  StylizeOptions opt;
  opt.alpha = 0.0;
  TF out = stylize(net, content, style, opt);
  TF ref = decode(net.decoder, encode_content(net.encoder, content));
  CHECK(out.dims() == Shape{3, 16, 20});
  CHECK(std::equal(out.data().begin(), out.data().end(), ref.data().begin()));
}

TEST_CASE("alpha one decodes the AdaIN feature") {
  StyleNetwork net = small_network(2);
  TF content = synth_content_image(16, 16, 3), style = synth_style_image(12, 16, 4);
  TF ref = decode(net.decoder, adain(encode_content(net.encoder, content), encode_content(net.encoder, style)));
  CHECK(std::equal(ref.data().begin(), ref.data().end(), stylize(net, content, style).data().begin()));
}

TEST_CASE("output size equals input size, with or without padding") {
  StyleNetwork net = small_network(3);
  TF style = synth_style_image(13, 11, 5);
  for (auto [h, w] : {std::pair<int, int>{16, 24}, {15, 17}, {9, 10}}) {
    TF out = stylize(net, synth_content_image(h, w, 6), style);
    CHECK(out.dims() == Shape{3, h, w});
  }
}

TEST_CASE("reflect padding mirrors edges and crops back") {
  TF img({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  TF p = reflect_pad_to(img, 4);
  CHECK(p.dims() == Shape{1, 1, 4, 4});
  const std::vector<float> expected{1, 2, 3, 2, 4, 5, 6, 5, 1, 2, 3, 2, 4, 5, 6, 5};
  CHECK(std::vector<float>(p.data().begin(), p.data().end()) == expected);
  CHECK(identical(crop_to(p, 2, 3), img));
  CHECK(identical(reflect_pad_to(img, 1), img));
}

TEST_CASE("stylize validates its options") {
  StyleNetwork net = small_network(4);
  TF c = synth_content_image(8, 8, 1), s = synth_style_image(8, 8, 2);
  StylizeOptions bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(stylize(net, c, s, bad), UsageError);
  StylizeOptions bad_prune;
  bad_prune.prune_fraction = 0.0;
  CHECK_THROWS_AS(stylize(net, c, s, bad_prune), UsageError);
}

TEST_CASE("stylize is deterministic and pruning changes the output") {
  StyleNetwork net = small_network(5);
  TF c = synth_content_image(16, 16, 1), s = synth_style_image(16, 16, 2);
  CHECK(identical(stylize(net, c, s), stylize(net, c, s)));
  StylizeOptions prune;
  prune.prune_fraction = 0.5;
  TF a = stylize(net, c, s, prune);
  CHECK(identical(a, stylize(net, c, s, prune)));
  CHECK_FALSE(identical(a, stylize(net, c, s)));
  prune.prune_fraction = 1.0;
  TF kept = transfer_features(net, c.clone(), s.clone(), {});
  TF kept_all = transfer_features(net, c, s, prune);
  // Keeping every nonzero channel changes nothing.
  CHECK(identical(kept, kept_all));
}

TEST_CASE("checkpoint directories round trip") {
  const auto dir = (fs::temp_directory_path() / "ufse_stylize_ckpt").string();
  fs::remove_all(dir);
  StyleNetwork net = small_network(6);
  save_style_network(dir, net);
  StyleNetwork back = load_style_network(dir);
  CHECK(back.encoder.config().style_taps == net.encoder.config().style_taps);
  CHECK(back.encoder.config().content_tap == "relu2_2");
  TF c = synth_content_image(16, 16, 1), s = synth_style_image(16, 16, 2);
  CHECK(identical(stylize(back, c, s), stylize(net, c, s)));
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_style_network(dir), IoError);
}

TEST_CASE("cascade feeds each output to the next stage") {
  std::vector<StyleNetwork> nets{small_network(7), small_network(8), small_network(9)};
  TF c = synth_content_image(16, 16, 3), s = synth_style_image(16, 16, 4);
  std::vector<TF> stages;
  TF out = stylize_cascade(nets, c, s, {}, &stages);
  REQUIRE(stages.size() == 3);
  CHECK(identical(stages[0], stylize(nets[0], c, s)));
  CHECK(identical(stages[1], stylize(nets[1], stages[0], s)));
  CHECK(identical(out, stages[2]));
  CHECK_THROWS_AS(stylize_cascade({}, c, s), UsageError);
}
