#include "ldis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <thread>

#include "ldis/json_io.hpp"
#include "random.hpp"

namespace ldis {

namespace {

constexpr int kMaxAttempts = 1000;

double quantize8(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

// RGB texture addressed in canvas pixels; reads clamp at the border.
struct Canvas {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;

  double at(int x, int y, int c) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  // Bilinear lookup; exact copy when (x, y) is integral.
  double sample(double x, double y, int c) const {
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const double fx = x - fx0;
    const double fy = y - fy0;
    const int ix = static_cast<int>(fx0);
    const int iy = static_cast<int>(fy0);
    if (fx == 0.0 && fy == 0.0) return at(ix, iy, c);
    return (1 - fy) * ((1 - fx) * at(ix, iy, c) + fx * at(ix + 1, iy, c)) +
           fy * ((1 - fx) * at(ix, iy + 1, c) + fx * at(ix + 1, iy + 1, c));
  }
};

std::vector<double> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= sum;
  return k;
}

void blur(Canvas& cv, double sigma) {
  if (sigma <= 0.0) return;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(cv.rgb.size());
  for (int y = 0; y < cv.height; ++y) {
    for (int x = 0; x < cv.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * cv.at(x + i, y, c);
        tmp[(static_cast<std::size_t>(y) * cv.width + x) * 3 + c] = s;
      }
    }
  }
  cv.rgb.swap(tmp);
  for (int y = 0; y < cv.height; ++y) {
    for (int x = 0; x < cv.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * cv.at(x, y + i, c);
        tmp[(static_cast<std::size_t>(y) * cv.width + x) * 3 + c] = s;
      }
    }
  }
  cv.rgb.swap(tmp);
}

// Stretches each channel to a random sub-range of [0.05, 0.95] and quantizes.
void normalize_channels(Canvas& cv, detail::Rng& rng) {
  for (int c = 0; c < 3; ++c) {
    double lo = 1e300;
    double hi = -1e300;
    for (std::size_t i = c; i < cv.rgb.size(); i += 3) {
      lo = std::min(lo, cv.rgb[i]);
      hi = std::max(hi, cv.rgb[i]);
    }
    const double out_lo = rng.uniform(0.05, 0.35);
    const double out_hi = rng.uniform(0.65, 0.95);
    const double scale = hi > lo ? (out_hi - out_lo) / (hi - lo) : 0.0;
    for (std::size_t i = c; i < cv.rgb.size(); i += 3) {
      cv.rgb[i] = quantize8(out_lo + (cv.rgb[i] - lo) * scale);
    }
  }
}

Canvas make_texture(const SceneSpec& spec, int width, int height, detail::Rng& rng) {
  Canvas cv{width, height, std::vector<double>(static_cast<std::size_t>(width) * height * 3)};
  switch (spec.texture) {
    case TextureKind::noise: {
      for (double& v : cv.rgb) v = rng.uniform();
      blur(cv, spec.texture_sigma);
      break;
    }
    case TextureKind::checker: {
      const int cell = rng.uniform_int(3, 8);
      const double phase_x = rng.uniform(0.0, cell);
      const double phase_y = rng.uniform(0.0, cell);
      double col[2][3];
      for (auto& row : col) {
        for (double& v : row) v = rng.uniform();
      }
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const int parity = (static_cast<int>(std::floor((x + phase_x) / cell)) +
                              static_cast<int>(std::floor((y + phase_y) / cell))) & 1;
          for (int c = 0; c < 3; ++c) {
            cv.rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c] = col[parity][c];
          }
        }
      }
      // Slight smoothing keeps edges differentiable for the fitter.
      blur(cv, 1.0);
      break;
    }
    case TextureKind::gradient: {
      // Sum of a few oriented sinusoids: smooth, nowhere flat.
      double fx[3], fy[3], ph[3][3];
      for (int k = 0; k < 3; ++k) {
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double period = rng.uniform(10.0, 30.0);
        fx[k] = std::cos(angle) * 2.0 * std::numbers::pi / period;
        fy[k] = std::sin(angle) * 2.0 * std::numbers::pi / period;
        for (int c = 0; c < 3; ++c) ph[k][c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      }
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += std::sin(fx[k] * x + fy[k] * y + ph[k][c]);
            cv.rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c] = s;
          }
        }
      }
      break;
    }
    case TextureKind::image: {
      const Image src = load_image(spec.texture_path);
      if (src.width() < width || src.height() < height) {
        throw Error(ErrorCode::invalid_argument,
                    "texture image is smaller than the " + std::to_string(width) + "x" +
                        std::to_string(height) + " canvas");
      }
      const int ox = rng.uniform_int(0, src.width() - width);
      const int oy = rng.uniform_int(0, src.height() - height);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          for (int c = 0; c < 3; ++c) {
            cv.rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c] = src.at(ox + x, oy + y, c);
          }
        }
      }
      break;
    }
  }
  normalize_channels(cv, rng);
  return cv;
}

struct Sprite {
  bool ellipse = false;
  double cx = 0.0;
  double cy = 0.0;
  double half_w = 0.0;
  double half_h = 0.0;

  bool contains(double x, double y) const {
    const double dx = (x - cx) / half_w;
    const double dy = (y - cy) / half_h;
    if (ellipse) return dx * dx + dy * dy <= 1.0;
    return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
  }
};

// Inverse of X -> X + u(X) for a pixel-space affine motion.
struct InverseMotion {
  double m[6];
  double inv[4];

  explicit InverseMotion(const PixelAffine& a) {
    std::copy(a.begin(), a.end(), m);
    const double a11 = 1.0 + a[1], a12 = a[2], a21 = a[4], a22 = 1.0 + a[5];
    const double det = a11 * a22 - a12 * a21;
    inv[0] = a22 / det;
    inv[1] = -a12 / det;
    inv[2] = -a21 / det;
    inv[3] = a11 / det;
  }

  void apply(double x, double y, double& sx, double& sy) const {
    const double rx = x - m[0];
    const double ry = y - m[3];
    sx = inv[0] * rx + inv[1] * ry;
    sy = inv[2] * rx + inv[3] * ry;
  }
};

double flow_u(const PixelAffine& a, double x, double y) { return a[0] + a[1] * x + a[2] * y; }
double flow_v(const PixelAffine& a, double x, double y) { return a[3] + a[4] * x + a[5] * y; }

// Scale s about (cx, cy) followed by translation t, in pixel coordinates.
PixelAffine scaled_translation(double s, double cx, double cy, double tx, double ty) {
  return PixelAffine{tx - (s - 1.0) * cx, s - 1.0, 0.0, ty - (s - 1.0) * cy, 0.0, s - 1.0};
}

double draw_translation(detail::Rng& rng, double range, bool integer_mode) {
  if (integer_mode) {
    const int r = static_cast<int>(std::floor(range));
    return static_cast<double>(rng.uniform_int(-r, r));
  }
  return rng.uniform(-range, range);
}

double draw_scale(detail::Rng& rng, double lo, double hi, bool integer_mode) {
  if (integer_mode || lo == hi) return integer_mode ? 1.0 : lo;
  return rng.uniform(lo, hi);
}

}  // namespace

void SceneSpec::validate() const {
  if (width < 16 || height < 16) throw Error(ErrorCode::invalid_argument, "scene must be at least 16x16");
  if (!(size_min > 0.0 && size_min <= size_max)) {
    throw Error(ErrorCode::invalid_argument, "invalid sprite size range");
  }
  if (size_max >= 0.9) throw Error(ErrorCode::degenerate, "sprite would cover the frame");
  if (!(fg_translation >= 0.0) || !(bg_translation >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "translation ranges must be >= 0");
  }
  const auto scale_ok = [](double lo, double hi) { return lo > 0.5 && lo <= hi && hi < 2.0; };
  if (!scale_ok(fg_scale_min, fg_scale_max) || !scale_ok(bg_scale_min, bg_scale_max)) {
    throw Error(ErrorCode::invalid_argument, "invalid scale range");
  }
  if (!(min_separation >= 0.0)) throw Error(ErrorCode::invalid_argument, "min_separation must be >= 0");
  // Largest separation the motion ranges can produce at the sprite centroid.
  const double fg_t = integer_mode ? std::floor(fg_translation) : fg_translation;
  const double bg_t = integer_mode ? std::floor(bg_translation) : bg_translation;
  const double bg_s = integer_mode ? 0.0
                                   : std::max(std::abs(bg_scale_max - 1.0), std::abs(bg_scale_min - 1.0));
  const double reach = std::sqrt(2.0) * (fg_t + bg_t) + bg_s * 0.5 * std::max(width, height);
  if (reach < min_separation || (min_separation > 0.0 && reach == 0.0)) {
    throw Error(ErrorCode::degenerate, "motion ranges cannot reach the minimum separation");
  }
  if (texture_sigma < 0.0) throw Error(ErrorCode::invalid_argument, "texture_sigma must be >= 0");
  if (texture == TextureKind::image && texture_path.empty()) {
    throw Error(ErrorCode::invalid_argument, "image texture requires texture_path");
  }
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  detail::Rng rng(spec.seed);
  const int w = spec.width;
  const int h = spec.height;
  const CoordMap cmap(w, h);

  Sprite sprite;
  PixelAffine fg{};
  PixelAffine bg{};
  bool found = false;
  for (int attempt = 0; attempt < kMaxAttempts && !found; ++attempt) {
    sprite.ellipse = spec.shape == SpriteShape::ellipse ||
                     (spec.shape == SpriteShape::random && rng.uniform() < 0.5);
    sprite.half_w = 0.5 * rng.uniform(spec.size_min, spec.size_max) * w;
    sprite.half_h = 0.5 * rng.uniform(spec.size_min, spec.size_max) * h;
    // Integral centers keep integer-mode masks exact under shifts.
    const int margin_x = static_cast<int>(std::ceil(sprite.half_w));
    const int margin_y = static_cast<int>(std::ceil(sprite.half_h));
    sprite.cx = rng.uniform_int(margin_x, w - 1 - margin_x);
    sprite.cy = rng.uniform_int(margin_y, h - 1 - margin_y);

    const double fs = draw_scale(rng, spec.fg_scale_min, spec.fg_scale_max, spec.integer_mode);
    const double bs = draw_scale(rng, spec.bg_scale_min, spec.bg_scale_max, spec.integer_mode);
    const double ftx = draw_translation(rng, spec.fg_translation, spec.integer_mode);
    const double fty = draw_translation(rng, spec.fg_translation, spec.integer_mode);
    const double btx = draw_translation(rng, spec.bg_translation, spec.integer_mode);
    const double bty = draw_translation(rng, spec.bg_translation, spec.integer_mode);
    fg = scaled_translation(fs, sprite.cx, sprite.cy, ftx, fty);
    bg = scaled_translation(bs, (w - 1) / 2.0, (h - 1) / 2.0, btx, bty);

    const double du = flow_u(fg, sprite.cx, sprite.cy) - flow_u(bg, sprite.cx, sprite.cy);
    const double dv = flow_v(fg, sprite.cx, sprite.cy) - flow_v(bg, sprite.cx, sprite.cy);
    if (std::hypot(du, dv) < spec.min_separation) continue;

    // The sprite must stay at least partly visible in frame 2.
    const double nx = sprite.cx + flow_u(fg, sprite.cx, sprite.cy);
    const double ny = sprite.cy + flow_v(fg, sprite.cx, sprite.cy);
    if (nx < 0.0 || nx > w - 1 || ny < 0.0 || ny > h - 1) continue;
    found = true;
  }
  if (!found) throw Error(ErrorCode::degenerate, "could not draw a scene satisfying the spec");

  // Canvas margin covers the largest displacement either motion produces.
  double max_disp = 0.0;
  for (const auto& m : {fg, bg}) {
    for (double x : {0.0, w - 1.0}) {
      for (double y : {0.0, h - 1.0}) {
        max_disp = std::max({max_disp, std::abs(flow_u(m, x, y)), std::abs(flow_v(m, x, y))});
      }
    }
  }
  const int margin = static_cast<int>(std::ceil(max_disp)) + 2;
  const Canvas bg_tex = make_texture(spec, w + 2 * margin, h + 2 * margin, rng);
  const Canvas fg_tex = make_texture(spec, w + 2 * margin, h + 2 * margin, rng);

  Scene s;
  s.spec = spec;
  s.motion_fg = fg;
  s.motion_bg = bg;
  s.centroid_x = sprite.cx;
  s.centroid_y = sprite.cy;
  s.frame1 = Image(w, h);
  s.frame2 = Image(w, h);
  s.mask1 = Mask(w, h);
  s.mask2 = Mask(w, h);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool inside = sprite.contains(x, y);
      s.mask1.at(x, y) = inside ? 1 : 0;
      const Canvas& tex = inside ? fg_tex : bg_tex;
      for (int c = 0; c < 3; ++c) s.frame1.at(x, y, c) = tex.at(x + margin, y + margin, c);
    }
  }

  const InverseMotion inv_fg(fg);
  const InverseMotion inv_bg(bg);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = 0.0;
      double sy = 0.0;
      inv_fg.apply(x, y, sx, sy);
      const bool inside = sprite.contains(sx, sy);
      s.mask2.at(x, y) = inside ? 1 : 0;
      if (!inside) inv_bg.apply(x, y, sx, sy);
      const Canvas& tex = inside ? fg_tex : bg_tex;
      for (int c = 0; c < 3; ++c) {
        s.frame2.at(x, y, c) = quantize8(tex.sample(sx + margin, sy + margin, c));
      }
    }
  }

  s.params_fg = from_pixel_affine(fg, cmap);
  s.params_bg = from_pixel_affine(bg, cmap);
  s.flow_fg = dense_flow(s.params_fg, cmap);
  s.flow_bg = dense_flow(s.params_bg, cmap);
  for (std::size_t i = 0; i < s.mask1.pixel_count(); ++i) {
    FlowField& zeroed = s.mask1.at(i) ? s.flow_bg : s.flow_fg;
    zeroed.at(i, 0) = 0.0;
    zeroed.at(i, 1) = 0.0;
  }
  return s;
}

double motion_separation(const Scene& scene) {
  const double du = flow_u(scene.motion_fg, scene.centroid_x, scene.centroid_y) -
                    flow_u(scene.motion_bg, scene.centroid_x, scene.centroid_y);
  const double dv = flow_v(scene.motion_fg, scene.centroid_x, scene.centroid_y) -
                    flow_v(scene.motion_bg, scene.centroid_x, scene.centroid_y);
  return std::hypot(du, dv);
}

std::uint64_t scene_seed(std::uint64_t seed, int index) {
  return detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(index) + 1));
}

void write_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_image(scene.frame1, dir / "frame1.png");
  save_image(scene.frame2, dir / "frame2.png");
  save_mask(scene.mask1, dir / "mask1.png");
  save_mask(scene.mask2, dir / "mask2.png");
  save_flow(scene.flow_fg, dir / "fg.flo");
  save_flow(scene.flow_bg, dir / "bg.flo");
  nlohmann::json params{{"fg", scene.params_fg},
                        {"bg", scene.params_bg},
                        {"fg_pixel_affine", scene.motion_fg},
                        {"bg_pixel_affine", scene.motion_bg},
                        {"centroid", {scene.centroid_x, scene.centroid_y}},
                        {"separation", motion_separation(scene)},
                        {"spec", scene.spec}};
  write_json(params, dir / "params.json");
}

Manifest generate_dataset(int count, const SceneSpec& spec, const std::filesystem::path& out_dir,
                          int jobs) {
  if (count < 1) throw Error(ErrorCode::invalid_argument, "dataset needs at least one scene");
  spec.validate();
  std::filesystem::create_directories(out_dir);
  Manifest manifest;
  manifest.spec = spec;
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "scene_%04d", i);
    manifest.scenes.push_back(ManifestEntry{id, scene_seed(spec.seed, i)});
  }
  const auto render = [&](int i) {
    SceneSpec s = spec;
    s.seed = manifest.scenes[static_cast<std::size_t>(i)].seed;
    write_scene(generate_scene(s), out_dir / manifest.scenes[static_cast<std::size_t>(i)].id);
  };
  jobs = std::clamp(jobs, 1, count);
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) render(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        try {
          for (int i = j; i < count; i += jobs) render(i);
        } catch (...) {
          errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  write_json(manifest, out_dir / "manifest.json");
  return manifest;
}

Manifest read_manifest(const std::filesystem::path& dataset_dir) {
  const auto path = dataset_dir / "manifest.json";
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::io, "no manifest.json in " + dataset_dir.string());
  }
  try {
    return read_json(path).get<Manifest>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, path.string() + ": " + e.what());
  }
}

}  // namespace ldis
