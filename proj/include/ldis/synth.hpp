#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ldis/affine.hpp"
#include "ldis/imagery.hpp"

namespace ldis {

enum class SpriteShape { rectangle, ellipse, random };
enum class TextureKind { noise, checker, gradient, image };

// Two-layer scene recipe: a textured sprite moving over a moving textured
// background, both under random linear motion.
struct SceneSpec {
  int width = 128;
  int height = 64;
  SpriteShape shape = SpriteShape::random;
  // Sprite extent as a fraction of the frame, per axis.
  double size_min = 0.15;
  double size_max = 0.4;
  // Translation ranges in pixels (symmetric).
  double fg_translation = 6.0;
  double bg_translation = 6.0;
  // Isotropic scale ranges; disabled when equal to 1 or in integer mode.
  double fg_scale_min = 1.0;
  double fg_scale_max = 1.0;
  double bg_scale_min = 1.0;
  double bg_scale_max = 1.0;
  TextureKind texture = TextureKind::noise;
  // Gaussian blur of the noise texture in pixels (band limit).
  double texture_sigma = 2.5;
  // Source image for TextureKind::image; random crops are taken from it.
  std::string texture_path;
  bool integer_mode = false;
  // Minimum |fg flow - bg flow| at the sprite centroid, pixels.
  double min_separation = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Scene {
  Image frame1;
  Image frame2;
  Mask mask1;  // sprite support in frame 1
  Mask mask2;  // sprite support in frame 2
  FlowField flow_fg;
  FlowField flow_bg;
  AffineParams params_fg;
  AffineParams params_bg;
  PixelAffine motion_fg{};
  PixelAffine motion_bg{};
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  SceneSpec spec;
};

// Frame 2 is rendered by sampling each layer backwards through its inverse
// motion from a background canvas larger than the frame, so it has no holes.
// Frames are quantized to 8-bit levels so they survive PNG storage exactly.
Scene generate_scene(const SceneSpec& spec);

// Flow difference between the two motions at the sprite centroid, pixels.
double motion_separation(const Scene& scene);

struct ManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
};

struct Manifest {
  SceneSpec spec;
  std::vector<ManifestEntry> scenes;
};

// Seed of scene `index` in a dataset generated with `seed`.
std::uint64_t scene_seed(std::uint64_t seed, int index);

// Writes `count` scenes under out_dir as scene_%04d/ plus manifest.json.
// `jobs` threads render scenes in parallel; output does not depend on it.
Manifest generate_dataset(int count, const SceneSpec& spec, const std::filesystem::path& out_dir,
                          int jobs = 1);

void write_scene(const Scene& scene, const std::filesystem::path& dir);
Manifest read_manifest(const std::filesystem::path& dataset_dir);

}  // namespace ldis
