// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "c3po/data.hpp"
#include "c3po/image_io.hpp"
#include "c3po/rng.hpp"

using namespace c3po;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("c3po_unit_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

SynthConfig clean_config() {
  SynthConfig c;
  c.image_size = 64;
  c.jitter = 0.0;
  c.noise_sigma = 0.0;
  c.misregistration = 0;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ChangeSample tiny_sample(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ChangeSample s;
  s.name = "s";
  s.t0 = Image(h, w);
  s.t1 = Image(h, w);
  for (auto& v : s.t0.pixels) v = static_cast<float>(rng.uniform());
  for (auto& v : s.t1.pixels) v = static_cast<float>(rng.uniform());
  s.mask = LabelMap{1, h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w)};
  for (auto& v : s.mask.labels) v = rng.bernoulli(0.3);
  return s;
}

bool same(const ChangeSample& a, const ChangeSample& b) {
  return a.t0 == b.t0 && a.t1 == b.t1 && a.mask == b.mask;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic") {
  auto cfg = SynthConfig{};
  cfg.image_size = 64;
  auto a = synth_generate(cfg, 3, 6);
  auto b = synth_generate(cfg, 3, 6);
  auto c = synth_generate(cfg, 4, 6);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(same(a[i], b[i]));
    CHECK(a[i].name == b[i].name);
  }
  CHECK_FALSE(same(a[0], c[0]));
  CHECK(synth_generate(cfg, 3, 0).empty());
  // Prefixes agree: sample i depends only on (seed, i).
  auto longer = synth_generate(cfg, 3, 8);
  CHECK(same(longer[5], a[5]));
}

TEST_CASE("disappear-only samples: objects in t0, background in t1") {
  auto cfg = clean_config().only(ChangeType::disappear);
  cfg.min_distractors = cfg.max_distractors = 0;
  for (const auto& s : synth_generate(cfg, 9, 12)) {
    CHECK(s.change_types == (1u << static_cast<int>(ChangeType::disappear)));
    // Objects are flat-coloured and the background is textured, so inside the
    // mask t0 holds a handful of colours while t1 holds many.
    std::set<std::array<float, 3>> inside0, inside1;
    std::size_t masked = 0, differing_inside = 0;
    for (int y = 0; y < s.t0.h; ++y)
      for (int x = 0; x < s.t0.w; ++x) {
        const bool m = s.mask.labels[static_cast<std::size_t>(y) * s.t0.w + x] != 0;
        float diff = 0.0f;
        for (int c = 0; c < 3; ++c) diff = std::max(diff, std::fabs(s.t0.at(c, y, x) - s.t1.at(c, y, x)));
        if (m) {
          ++masked;
          differing_inside += diff > 1.0f / 255;
          inside0.insert({s.t0.at(0, y, x), s.t0.at(1, y, x), s.t0.at(2, y, x)});
          inside1.insert({s.t1.at(0, y, x), s.t1.at(1, y, x), s.t1.at(2, y, x)});
        } else {
          CHECK(diff == 0.0f);
        }
      }
    CHECK(masked > 0);
    CHECK(differing_inside >= masked * 9 / 10);
    CHECK(inside0.size() <= 3);
    CHECK(inside1.size() > 20);
  }
}

TEST_CASE("change types follow the configured probabilities") {
  auto cfg = clean_config().only(ChangeType::exchange);
  for (const auto& s : synth_generate(cfg, 1, 8)) {
    CHECK(s.has(ChangeType::exchange));
    CHECK_FALSE(s.has(ChangeType::appear));
  }
  auto multi = clean_config();
  multi.multiclass = true;
  CHECK(multi.num_classes() == 4);
  std::set<int> seen;
  for (const auto& s : synth_generate(multi, 2, 10))
    for (auto v : s.mask.labels) seen.insert(v);
  CHECK(*seen.rbegin() <= 3);
  CHECK(seen.size() > 2);
}

TEST_CASE("annotation noise drops mask regions") {
  auto cfg = clean_config();
  cfg.annotation_noise = 1.0;
  for (const auto& s : synth_generate(cfg, 5, 4))
    for (auto v : s.mask.labels) CHECK(v == 0);
}

TEST_CASE("synth config validation") {
  auto cfg = clean_config();
  cfg.image_size = 70;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = clean_config();
  cfg.change_probs = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = clean_config();
  cfg.max_object_size = 40;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS((void)parse_change_type("vanish"));
  CHECK(parse_shape_kind("disc") == ShapeKind::disc);
}

TEST_CASE("png round trips") {
  auto dir = temp_dir("png");
  auto s = synth_generate(clean_config(), 1, 1)[0];
  write_png_rgb(dir / "a.png", s.t0);
  CHECK(read_png_rgb(dir / "a.png") == s.t0);
  GrayImage g{2, 3, {0, 1, 2, 3, 200, 255}};
  write_png_gray(dir / "g.png", g);
  auto back = read_png_gray(dir / "g.png");
  CHECK(back.pixels == g.pixels);
  CHECK_THROWS_AS(read_png_rgb(dir / "missing.png"), ImageIoError);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS(read_png_rgb(dir / "junk.png"), ImageIoError);
}

TEST_CASE("dataset loader: order, skip with warning, binarize") {
  auto dir = temp_dir("loader");
  auto samples = synth_generate(clean_config(), 2, 3);
  samples[0].name = "c";
  samples[1].name = "a";
  samples[2].name = "b";
  samples[1].mask.labels[0] = 7;
  for (const auto& s : samples) save_sample(dir, s);
  auto loaded = load_dataset(dir, 2);
  REQUIRE(loaded.samples.size() == 3);
  CHECK(loaded.samples[0].name == "a");
  CHECK(loaded.samples[1].name == "b");
  CHECK(loaded.samples[0].mask.labels[0] == 1);
  CHECK(loaded.samples[0].t0 == samples[1].t0);
  CHECK(loaded.warnings.empty());

  auto raw = load_dataset(dir, 0);
  CHECK(raw.samples[0].mask.labels[0] == 7);
  CHECK_THROWS(load_dataset(dir, 4));

  std::filesystem::remove(dir / "t1" / "b.png");
  auto partial = load_dataset(dir, 2);
  CHECK(partial.samples.size() == 2);
  CHECK(partial.warnings.size() == 1);

  CHECK_THROWS_AS(load_dataset(dir / "nowhere", 2), std::invalid_argument);
}

TEST_CASE("augmentation identities") {
  auto s = tiny_sample(6, 6, 1);
  CHECK(same(rotate90(s, 4), s));
  CHECK(same(rotate90(rotate90(s, 1), 3), s));
  CHECK(same(hflip(hflip(s)), s));
  auto r = rotate90(s, 1);
  // Counter-clockwise: the top-right pixel moves to the top-left.
  CHECK(r.mask.labels[0] == s.mask.labels[5]);
  auto j = color_jitter(s, 0.2, 3);
  CHECK(j.mask == s.mask);
  CHECK_FALSE(j.t0 == s.t0);
  CHECK(same(augment(s, kRot90s | kHflip | kColorJitter, 5), augment(s, kRot90s | kHflip | kColorJitter, 5)));
  CHECK(same(augment(s, 0, 5), s));
}

TEST_CASE("train/test split") {
  std::vector<ChangeSample> v(10);
  for (int i = 0; i < 10; ++i) v[i].name = std::to_string(i);
  auto sp = split(v, 0.8, 1);
  CHECK(sp.train.size() == 8);
  CHECK(sp.test.size() == 2);
  std::set<std::string> names;
  for (const auto& s : sp.train) names.insert(s.name);
  for (const auto& s : sp.test) names.insert(s.name);
  CHECK(names.size() == 10);
  auto again = split(v, 0.8, 1);
  for (std::size_t i = 0; i < 8; ++i) CHECK(again.train[i].name == sp.train[i].name);
  std::vector<ChangeSample> three(v.begin(), v.begin() + 3);
  auto odd = split(three, 0.5, 2);
  CHECK(odd.train.size() == 2);
  CHECK(odd.test.size() == 1);
}

TEST_CASE("batches stack samples and can swap the pair") {
  std::vector<ChangeSample> v{tiny_sample(4, 4, 1), tiny_sample(4, 4, 2)};
  const std::vector<std::size_t> idx{1, 0};
  auto b = make_batch<float>(v, idx, false);
  CHECK(b.t0.shape() == Shape{2, 3, 4, 4});
  CHECK(b.t0.at(0, 1, 2, 3) == v[1].t0.at(1, 2, 3));
  CHECK(b.mask.n == 2);
  auto swapped = make_batch<float>(v, idx, true);
  CHECK(swapped.t0.at(1, 0, 0, 0) == v[0].t1.at(0, 0, 0));
  CHECK(tensor_image(image_tensor(v[0].t0)) == v[0].t0);
}

TEST_CASE("saved samples are byte-identical for the same seed") {
  auto d1 = temp_dir("bytes1");
  auto d2 = temp_dir("bytes2");
  for (const auto& s : synth_generate(clean_config(), 8, 2)) save_sample(d1, s);
  for (const auto& s : synth_generate(clean_config(), 8, 2)) save_sample(d2, s);
  for (const char* sub : {"t0", "t1", "mask"})
    for (const auto& e : std::filesystem::directory_iterator(d1 / sub))
      CHECK(slurp(e.path()) == slurp(d2 / sub / e.path().filename()));
}
