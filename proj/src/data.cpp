// SPDX-License-Identifier: Apache-2.0
#include "c3po/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>

#include "c3po/rng.hpp"

namespace c3po {

std::string_view change_type_name(ChangeType t) {
  switch (t) {
    case ChangeType::appear: return "appear";
    case ChangeType::disappear: return "disappear";
    case ChangeType::exchange: return "exchange";
  }
  return "?";
}

ChangeType parse_change_type(std::string_view name) {
  for (auto t : {ChangeType::appear, ChangeType::disappear, ChangeType::exchange})
    if (change_type_name(t) == name) return t;
  throw std::invalid_argument("unknown change type '" + std::string(name) +
                              "' (use appear, disappear, exchange)");
}

std::string_view shape_kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::rect: return "rect";
    case ShapeKind::disc: return "disc";
    case ShapeKind::triangle: return "triangle";
  }
  return "?";
}

ShapeKind parse_shape_kind(std::string_view name) {
  for (auto k : {ShapeKind::rect, ShapeKind::disc, ShapeKind::triangle})
    if (shape_kind_name(k) == name) return k;
  throw std::invalid_argument("unknown shape '" + std::string(name) +
                              "' (use rect, disc, triangle)");
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synth: " + what); };
  if (image_size < 64 || image_size % 32 != 0)
    fail("image_size must be >= 64 and divisible by 32, got " + std::to_string(image_size));
  if (min_distractors < 0 || max_distractors < min_distractors)
    fail("distractor range must satisfy 0 <= min <= max");
  if (min_changes < 0 || max_changes < min_changes)
    fail("change range must satisfy 0 <= min <= max");
  if (min_object_size < 2 || max_object_size < min_object_size ||
      4 * max_object_size > image_size)
    fail("object size range must satisfy 2 <= min <= max <= image_size / 4");
  if (shapes.empty()) fail("shape vocabulary is empty");
  double total = 0.0;
  for (double p : change_probs) {
    if (!(p >= 0.0)) fail("change probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) fail("change probabilities must sum to 1");
  if (!(texture_amplitude >= 0.0 && texture_amplitude <= 1.0))
    fail("texture_amplitude must be in [0, 1]");
  if (!(jitter >= 0.0 && jitter <= 0.5)) fail("jitter must be in [0, 0.5]");
  if (!(noise_sigma >= 0.0 && noise_sigma <= 0.5)) fail("noise_sigma must be in [0, 0.5]");
  if (misregistration < 0 || 8 * misregistration > image_size)
    fail("misregistration must be in [0, image_size / 8]");
  if (!(annotation_noise >= 0.0 && annotation_noise <= 1.0))
    fail("annotation_noise must be in [0, 1]");
}

SynthConfig SynthConfig::only(ChangeType t) const {
  SynthConfig c = *this;
  c.change_probs = {0.0, 0.0, 0.0};
  c.change_probs[static_cast<int>(t)] = 1.0;
  return c;
}

namespace {

using Rgb = std::array<float, 3>;

struct Object {
  ShapeKind kind = ShapeKind::rect;
  double cx = 0.0;
  double cy = 0.0;
  double rx = 0.0;  // half extents, or radius for discs
  double ry = 0.0;
  std::array<double, 6> tri{};  // vertex offsets from the centre
  Rgb color{};

  [[nodiscard]] bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    switch (kind) {
      case ShapeKind::rect: return std::abs(dx) <= rx && std::abs(dy) <= ry;
      case ShapeKind::disc: return dx * dx + dy * dy <= rx * rx;
      case ShapeKind::triangle: {
        auto edge = [&](int a, int b) {
          return (tri[2 * b] - tri[2 * a]) * (dy - tri[2 * a + 1]) -
                 (tri[2 * b + 1] - tri[2 * a + 1]) * (dx - tri[2 * a]);
        };
        const double e0 = edge(0, 1);
        const double e1 = edge(1, 2);
        const double e2 = edge(2, 0);
        return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
      }
    }
    return false;
  }
  [[nodiscard]] double extent() const { return std::max(rx, ry); }
};

struct Grating {
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;
  Rgb amplitude{};
};

struct Background {
  Rgb base{};
  std::vector<Grating> gratings;

  [[nodiscard]] float value(int c, double x, double y) const {
    double v = base[c];
    for (const auto& g : gratings) v += g.amplitude[c] * std::sin(g.kx * x + g.ky * y + g.phase);
    return static_cast<float>(v);
  }
};

Background make_background(const SynthConfig& cfg, Rng& rng) {
  Background bg;
  for (auto& b : bg.base) b = static_cast<float>(rng.uniform(0.3, 0.7));
  const int n = 4;
  for (int i = 0; i < n; ++i) {
    Grating g;
    const double wavelength = rng.uniform(3.0, 16.0);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    g.kx = 2.0 * std::numbers::pi / wavelength * std::cos(angle);
    g.ky = 2.0 * std::numbers::pi / wavelength * std::sin(angle);
    g.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (auto& a : g.amplitude)
      a = static_cast<float>(cfg.texture_amplitude / n * rng.uniform(0.5, 1.5));
    bg.gratings.push_back(g);
  }
  return bg;
}

double color_distance(const Rgb& a, const Rgb& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

Rgb random_color(Rng& rng, const std::vector<Rgb>& avoid) {
  Rgb c{};
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (auto& v : c) v = static_cast<float>(rng.uniform());
    bool ok = true;
    for (const auto& a : avoid) ok = ok && color_distance(c, a) > 0.45;
    if (ok) break;
  }
  return c;
}

/// Object with half-extent in [min_object_size, extent].
Object random_object(const SynthConfig& cfg, Rng& rng, double cx, double cy, double extent,
                     const std::vector<Rgb>& avoid_colors) {
  Object o;
  o.kind = cfg.shapes[rng.uniform_int(0, static_cast<int>(cfg.shapes.size()) - 1)];
  o.cx = cx;
  o.cy = cy;
  const double lo = cfg.min_object_size;
  const double hi = extent;
  switch (o.kind) {
    case ShapeKind::rect:
      o.rx = rng.uniform(lo, hi);
      o.ry = rng.uniform(lo, hi);
      break;
    case ShapeKind::disc: o.rx = o.ry = rng.uniform(lo, hi); break;
    case ShapeKind::triangle: {
      const double r = rng.uniform(lo, hi);
      const double rot = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int v = 0; v < 3; ++v) {
        const double a = rot + v * 2.0 * std::numbers::pi / 3.0 + rng.uniform(-0.3, 0.3);
        o.tri[2 * v] = r * std::cos(a);
        o.tri[2 * v + 1] = r * std::sin(a);
      }
      o.rx = o.ry = r;
      break;
    }
  }
  o.color = random_color(rng, avoid_colors);
  return o;
}

struct Placed {
  Object t0;
  Object t1;
  bool in_t0 = true;
  bool in_t1 = true;
  std::optional<ChangeType> change;
  bool annotated = true;
};

std::optional<std::vector<Placed>> place_objects(const SynthConfig& cfg, Rng& rng,
                                                 const Background& bg) {
  const int n_distract = rng.uniform_int(cfg.min_distractors, cfg.max_distractors);
  const int n_change = rng.uniform_int(cfg.min_changes, cfg.max_changes);
  std::vector<Placed> placed;
  std::vector<std::array<double, 3>> footprints;  // cx, cy, extent
  const double margin = 1.0 + cfg.misregistration;
  const double size = cfg.image_size;

  auto free_at = [&](double cx, double cy, double extent) {
    for (const auto& f : footprints) {
      const double gap = extent + f[2] + margin;
      if (std::abs(cx - f[0]) < gap && std::abs(cy - f[1]) < gap) return false;
    }
    return true;
  };

  for (int i = 0; i < n_distract + n_change; ++i) {
    const double extent = rng.uniform(cfg.min_object_size, cfg.max_object_size);
    const double reach = extent + margin;
    std::optional<std::pair<double, double>> spot;
    for (int attempt = 0; attempt < 200 && !spot; ++attempt) {
      const double cx = rng.uniform(reach, size - reach);
      const double cy = rng.uniform(reach, size - reach);
      if (free_at(cx, cy, extent)) spot = {cx, cy};
    }
    if (!spot) return std::nullopt;
    footprints.push_back({spot->first, spot->second, extent});

    const std::vector<Rgb> avoid{bg.base};
    Placed p;
    p.t0 = random_object(cfg, rng, spot->first, spot->second, extent, avoid);
    p.t1 = p.t0;
    if (i >= n_distract) {
      double u = rng.uniform();
      int type = 2;
      for (int t = 0; t < 3; ++t) {
        if (u < cfg.change_probs[t]) {
          type = t;
          break;
        }
        u -= cfg.change_probs[t];
      }
      while (cfg.change_probs[type] == 0.0) --type;
      p.change = static_cast<ChangeType>(type);
      switch (*p.change) {
        case ChangeType::appear: p.in_t0 = false; break;
        case ChangeType::disappear: p.in_t1 = false; break;
        case ChangeType::exchange: {
          p.t1 = random_object(cfg, rng, spot->first, spot->second, extent, {bg.base, p.t0.color});
          break;
        }
      }
      p.annotated = !rng.bernoulli(cfg.annotation_noise);
    }
    placed.push_back(p);
  }
  return placed;
}

struct Jitter {
  float contrast = 1.0f;
  float brightness = 0.0f;
  Rgb gain{1.0f, 1.0f, 1.0f};
};

Jitter draw_jitter(double amplitude, Rng& rng) {
  Jitter j;
  if (amplitude <= 0.0) return j;
  j.contrast = static_cast<float>(1.0 + rng.uniform(-amplitude, amplitude));
  j.brightness = static_cast<float>(rng.uniform(-amplitude, amplitude));
  for (auto& g : j.gain) g = static_cast<float>(1.0 + rng.uniform(-amplitude, amplitude) * 0.5);
  return j;
}

float quantize(float v) { return std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f; }

void apply_jitter(Image& img, const Jitter& j) {
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        float& v = img.at(c, y, x);
        v = quantize(((v - 0.5f) * j.contrast + 0.5f + j.brightness) * j.gain[c]);
      }
}

/// Renders one epoch of the scene. (ox, oy) shifts everything, which is how
/// misregistration between the two acquisitions is simulated.
Image render(const SynthConfig& cfg, const Background& bg, const std::vector<Placed>& objects,
             bool second, double ox, double oy, Rng& noise_rng) {
  const int s = cfg.image_size;
  Image img(s, s);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const double px = x + 0.5 - ox;
      const double py = y + 0.5 - oy;
      Rgb v{bg.value(0, px, py), bg.value(1, px, py), bg.value(2, px, py)};
      for (const auto& p : objects) {
        if (second ? !p.in_t1 : !p.in_t0) continue;
        const Object& o = second ? p.t1 : p.t0;
        if (o.contains(px, py)) v = o.color;
      }
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = v[c];
    }
  if (cfg.noise_sigma > 0.0)
    for (auto& v : img.pixels) v += static_cast<float>(cfg.noise_sigma * noise_rng.normal());
  return img;
}

}  // namespace

ChangeSample synth_sample(const SynthConfig& cfg, std::uint64_t sub_seed, std::string name) {
  cfg.validate();
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed(sub_seed, attempt));
    Rng bg_rng(derive_seed(cfg.background_seed, derive_seed(sub_seed, attempt)));
    const Background bg = make_background(cfg, bg_rng);
    auto objects = place_objects(cfg, rng, bg);
    if (!objects) {
      if (attempt >= 64)
        throw std::runtime_error("synth: cannot place objects; reduce object count or size");
      continue;
    }
    const double ox = rng.uniform_int(-cfg.misregistration, cfg.misregistration);
    const double oy = rng.uniform_int(-cfg.misregistration, cfg.misregistration);
    const Jitter j0 = draw_jitter(cfg.jitter, rng);
    const Jitter j1 = draw_jitter(cfg.jitter, rng);
    Rng noise0(rng.next());
    Rng noise1(rng.next());

    ChangeSample s;
    s.name = std::move(name);
    s.t0 = render(cfg, bg, *objects, false, 0.0, 0.0, noise0);
    s.t1 = render(cfg, bg, *objects, true, ox, oy, noise1);
    apply_jitter(s.t0, j0);
    apply_jitter(s.t1, j1);

    const int size = cfg.image_size;
    s.mask = LabelMap{1, size, size, std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size, 0)};
    for (const auto& p : *objects) {
      if (!p.change) continue;
      s.change_types |= static_cast<std::uint8_t>(1u << static_cast<int>(*p.change));
      if (!p.annotated) continue;
      const auto label =
          static_cast<std::uint8_t>(cfg.multiclass ? 1 + static_cast<int>(*p.change) : 1);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const bool covered = (p.in_t0 && p.t0.contains(x + 0.5, y + 0.5)) ||
                               (p.in_t1 && p.t1.contains(x + 0.5 - ox, y + 0.5 - oy));
          if (covered) s.mask.labels[static_cast<std::size_t>(y) * size + x] = label;
        }
    }
    return s;
  }
}

std::vector<ChangeSample> synth_generate(const SynthConfig& cfg, std::uint64_t seed,
                                         std::size_t count) {
  cfg.validate();
  std::vector<ChangeSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu", i);
    out.push_back(synth_sample(cfg, derive_seed(seed, i), name));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Disk layout
// ---------------------------------------------------------------------------

namespace {

std::set<std::string> png_stems(const std::filesystem::path& dir) {
  std::set<std::string> stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      stems.insert(entry.path().stem().string());
  return stems;
}

}  // namespace

LoadedDataset load_dataset(const std::filesystem::path& root, int num_classes, DatasetLayout) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw std::invalid_argument("dataset root '" + root.string() + "' does not exist");
  for (const char* sub : {"t0", "t1", "mask"})
    if (!fs::is_directory(root / sub))
      throw std::invalid_argument("dataset root '" + root.string() + "' lacks the " + sub +
                                  "/ directory");
  const auto s0 = png_stems(root / "t0");
  const auto s1 = png_stems(root / "t1");
  const auto sm = png_stems(root / "mask");
  std::set<std::string> all;
  all.insert(s0.begin(), s0.end());
  all.insert(s1.begin(), s1.end());
  all.insert(sm.begin(), sm.end());

  LoadedDataset out;
  for (const auto& stem : all) {
    std::vector<std::string> missing;
    if (!s0.count(stem)) missing.push_back("t0");
    if (!s1.count(stem)) missing.push_back("t1");
    if (!sm.count(stem)) missing.push_back("mask");
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      out.warnings.push_back("skipping '" + stem + "': no counterpart in " + list);
      continue;
    }
    ChangeSample s;
    s.name = stem;
    const std::string file = stem + ".png";
    s.t0 = read_png_rgb(root / "t0" / file);
    s.t1 = read_png_rgb(root / "t1" / file);
    const GrayImage m = read_png_gray(root / "mask" / file);
    if (s.t0.h != s.t1.h || s.t0.w != s.t1.w || m.h != s.t0.h || m.w != s.t0.w)
      throw ImageIoError("'" + stem + "': t0, t1 and mask sizes differ");
    s.mask = LabelMap{1, m.h, m.w, m.pixels};
    for (auto& v : s.mask.labels) {
      if (num_classes == 2) {
        v = v != 0 ? 1 : 0;
      } else if (num_classes > 2 && v >= num_classes) {
        throw ImageIoError("'" + (root / "mask" / file).string() + "': label " +
                           std::to_string(v) + " outside [0, " + std::to_string(num_classes - 1) +
                           "]");
      }
      if (num_classes > 2 && v > 0 && v <= 3) s.change_types |= static_cast<std::uint8_t>(1u << (v - 1));
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

void save_sample(const std::filesystem::path& root, const ChangeSample& sample) {
  namespace fs = std::filesystem;
  for (const char* sub : {"t0", "t1", "mask"}) fs::create_directories(root / sub);
  const std::string file = sample.name + ".png";
  write_png_rgb(root / "t0" / file, sample.t0);
  write_png_rgb(root / "t1" / file, sample.t1);
  write_png_gray(root / "mask" / file, GrayImage{sample.mask.h, sample.mask.w, sample.mask.labels});
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

namespace {

// Maps every destination pixel to its source through `src_of`.
template <typename F>
ChangeSample remap(const ChangeSample& s, int out_h, int out_w, F src_of) {
  ChangeSample r;
  r.name = s.name;
  r.change_types = s.change_types;
  r.t0 = Image(out_h, out_w);
  r.t1 = Image(out_h, out_w);
  r.mask = LabelMap{1, out_h, out_w, std::vector<std::uint8_t>(static_cast<std::size_t>(out_h) * out_w)};
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const auto [sy, sx] = src_of(y, x);
      for (int c = 0; c < 3; ++c) {
        r.t0.at(c, y, x) = s.t0.at(c, sy, sx);
        r.t1.at(c, y, x) = s.t1.at(c, sy, sx);
      }
      r.mask.labels[static_cast<std::size_t>(y) * out_w + x] =
          s.mask.labels[static_cast<std::size_t>(sy) * s.mask.w + sx];
    }
  return r;
}

}  // namespace

ChangeSample rotate90(const ChangeSample& s, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return s;
  const int h = s.t0.h;
  const int w = s.t0.w;
  if (k == 2)
    return remap(s, h, w, [&](int y, int x) { return std::pair{h - 1 - y, w - 1 - x}; });
  // One counter-clockwise turn: out(y, x) = in(x, w - 1 - y), output is w x h.
  if (k == 1) return remap(s, w, h, [&](int y, int x) { return std::pair{x, w - 1 - y}; });
  return remap(s, w, h, [&](int y, int x) { return std::pair{h - 1 - x, y}; });
}

ChangeSample hflip(const ChangeSample& s) {
  const int w = s.t0.w;
  return remap(s, s.t0.h, w, [&](int y, int x) { return std::pair{y, w - 1 - x}; });
}

ChangeSample color_jitter(const ChangeSample& s, double amplitude, std::uint64_t seed) {
  Rng rng(seed);
  ChangeSample r = s;
  apply_jitter(r.t0, draw_jitter(amplitude, rng));
  apply_jitter(r.t1, draw_jitter(amplitude, rng));
  return r;
}

ChangeSample augment(const ChangeSample& s, unsigned ops, std::uint64_t seed,
                     double jitter_amplitude) {
  Rng rng(seed);
  ChangeSample r = s;
  if (ops & kRot90s) r = rotate90(r, rng.uniform_int(0, 3));
  if ((ops & kHflip) && rng.bernoulli(0.5)) r = hflip(r);
  if (ops & kColorJitter) r = color_jitter(r, jitter_amplitude, rng.next());
  return r;
}

// ---------------------------------------------------------------------------
// Splits and batches
// ---------------------------------------------------------------------------

Split split(std::vector<ChangeSample> samples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must be in (0, 1)");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(
      std::ceil(train_fraction * static_cast<double>(samples.size()) - 1e-9));
  Split out;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? out.train : out.test).push_back(std::move(samples[order[i]]));
  return out;
}

template <typename T>
Batch<T> make_batch(const std::vector<ChangeSample>& samples, std::span<const std::size_t> indices,
                    bool swap_pair) {
  if (indices.empty()) throw std::invalid_argument("empty batch");
  const auto& first = samples.at(indices[0]);
  const int h = first.t0.h;
  const int w = first.t0.w;
  const int n = static_cast<int>(indices.size());
  const std::size_t img = static_cast<std::size_t>(3) * h * w;
  std::vector<T> a(img * n);
  std::vector<T> b(img * n);
  LabelMap mask{n, h, w, {}};
  mask.labels.reserve(static_cast<std::size_t>(n) * h * w);
  for (int i = 0; i < n; ++i) {
    const auto& s = samples.at(indices[i]);
    if (s.t0.h != h || s.t0.w != w)
      throw ShapeError("batch mixes image sizes: " + std::to_string(h) + "x" + std::to_string(w) +
                       " and " + std::to_string(s.t0.h) + "x" + std::to_string(s.t0.w));
    const Image& x0 = swap_pair ? s.t1 : s.t0;
    const Image& x1 = swap_pair ? s.t0 : s.t1;
    std::copy(x0.pixels.begin(), x0.pixels.end(), a.begin() + img * i);
    std::copy(x1.pixels.begin(), x1.pixels.end(), b.begin() + img * i);
    mask.labels.insert(mask.labels.end(), s.mask.labels.begin(), s.mask.labels.end());
  }
  return Batch<T>{Tensor<T>(Shape{n, 3, h, w}, std::move(a)),
                  Tensor<T>(Shape{n, 3, h, w}, std::move(b)), std::move(mask)};
}

template Batch<float> make_batch(const std::vector<ChangeSample>&, std::span<const std::size_t>,
                                 bool);
template Batch<double> make_batch(const std::vector<ChangeSample>&, std::span<const std::size_t>,
                                  bool);

Tensor<float> image_tensor(const Image& img) {
  return Tensor<float>(Shape{1, 3, img.h, img.w}, img.pixels);
}

Image tensor_image(const Tensor<float>& t, int n) {
  const Shape& s = t.shape();
  if (s.c != 3) throw ShapeError("tensor_image expects 3 channels, got " + s.str());
  Image img(s.h, s.w);
  const auto data = t.data();
  std::copy(data.begin() + static_cast<std::ptrdiff_t>(n) * 3 * s.h * s.w,
            data.begin() + static_cast<std::ptrdiff_t>(n + 1) * 3 * s.h * s.w, img.pixels.begin());
  return img;
}

}  // namespace c3po
