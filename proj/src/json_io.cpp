#include "ldis/json_io.hpp"

#include <fstream>

namespace ldis {

using nlohmann::json;

namespace {

const char* shape_name(SpriteShape s) {
  switch (s) {
    case SpriteShape::rectangle: return "rectangle";
    case SpriteShape::ellipse: return "ellipse";
    case SpriteShape::random: return "random";
  }
  return "random";
}

SpriteShape parse_shape(const std::string& s) {
  if (s == "rectangle") return SpriteShape::rectangle;
  if (s == "ellipse") return SpriteShape::ellipse;
  if (s == "random") return SpriteShape::random;
  throw Error(ErrorCode::invalid_argument, "unknown sprite shape '" + s + "'");
}

const char* texture_name(TextureKind t) {
  switch (t) {
    case TextureKind::noise: return "noise";
    case TextureKind::checker: return "checker";
    case TextureKind::gradient: return "gradient";
    case TextureKind::image: return "image";
  }
  return "noise";
}

TextureKind parse_texture(const std::string& s) {
  if (s == "noise") return TextureKind::noise;
  if (s == "checker") return TextureKind::checker;
  if (s == "gradient") return TextureKind::gradient;
  if (s == "image") return TextureKind::image;
  throw Error(ErrorCode::invalid_argument, "unknown texture kind '" + s + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void to_json(json& j, const AffineParams& p) {
  j = json{{"coords", "normalized"}, {"params", p.a}};
}

void from_json(const json& j, AffineParams& p) {
  if (j.is_array()) {
    j.get_to(p.a);
    return;
  }
  if (j.value("coords", std::string("normalized")) != "normalized") {
    throw Error(ErrorCode::format, "affine params: unsupported coordinate convention");
  }
  j.at("params").get_to(p.a);
}

void to_json(json& j, const SceneSpec& s) {
  j = json{{"width", s.width},
           {"height", s.height},
           {"shape", shape_name(s.shape)},
           {"size_min", s.size_min},
           {"size_max", s.size_max},
           {"fg_translation", s.fg_translation},
           {"bg_translation", s.bg_translation},
           {"fg_scale_min", s.fg_scale_min},
           {"fg_scale_max", s.fg_scale_max},
           {"bg_scale_min", s.bg_scale_min},
           {"bg_scale_max", s.bg_scale_max},
           {"texture", texture_name(s.texture)},
           {"texture_sigma", s.texture_sigma},
           {"texture_path", s.texture_path},
           {"integer_mode", s.integer_mode},
           {"min_separation", s.min_separation},
           {"seed", s.seed}};
}

void from_json(const json& j, SceneSpec& s) {
  read_opt(j, "width", s.width);
  read_opt(j, "height", s.height);
  if (j.contains("shape")) s.shape = parse_shape(j.at("shape").get<std::string>());
  read_opt(j, "size_min", s.size_min);
  read_opt(j, "size_max", s.size_max);
  read_opt(j, "fg_translation", s.fg_translation);
  read_opt(j, "bg_translation", s.bg_translation);
  read_opt(j, "fg_scale_min", s.fg_scale_min);
  read_opt(j, "fg_scale_max", s.fg_scale_max);
  read_opt(j, "bg_scale_min", s.bg_scale_min);
  read_opt(j, "bg_scale_max", s.bg_scale_max);
  if (j.contains("texture")) s.texture = parse_texture(j.at("texture").get<std::string>());
  read_opt(j, "texture_sigma", s.texture_sigma);
  read_opt(j, "texture_path", s.texture_path);
  read_opt(j, "integer_mode", s.integer_mode);
  read_opt(j, "min_separation", s.min_separation);
  read_opt(j, "seed", s.seed);
}

void to_json(json& j, const FitConfig& c) {
  j = json{{"lr_params", c.lr_params},
           {"lr_alpha", c.lr_alpha},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"adam_eps", c.adam_eps},
           {"max_iters", c.max_iters},
           {"restarts", c.restarts},
           {"tau_start", c.tau_start},
           {"tau_end", c.tau_end},
           {"seed", c.seed},
           {"convergence_tol", c.convergence_tol},
           {"convergence_window", c.convergence_window},
           {"threshold", c.threshold},
           {"disocclusion_eps", c.disocclusion_eps},
           {"dominant_fraction", c.dominant_fraction},
           {"support_fraction", c.support_fraction},
           {"search_radius", c.search_radius},
           {"reassign_every", c.reassign_every},
           {"assign_margin", c.assign_margin},
           {"refine_lr", c.refine_lr},
           {"lr_decay", c.lr_decay}};
}

void from_json(const json& j, FitConfig& c) {
  read_opt(j, "lr_params", c.lr_params);
  read_opt(j, "lr_alpha", c.lr_alpha);
  read_opt(j, "beta1", c.beta1);
  read_opt(j, "beta2", c.beta2);
  read_opt(j, "adam_eps", c.adam_eps);
  read_opt(j, "max_iters", c.max_iters);
  read_opt(j, "restarts", c.restarts);
  read_opt(j, "tau_start", c.tau_start);
  read_opt(j, "tau_end", c.tau_end);
  read_opt(j, "seed", c.seed);
  read_opt(j, "convergence_tol", c.convergence_tol);
  read_opt(j, "convergence_window", c.convergence_window);
  read_opt(j, "threshold", c.threshold);
  read_opt(j, "disocclusion_eps", c.disocclusion_eps);
  read_opt(j, "dominant_fraction", c.dominant_fraction);
  read_opt(j, "support_fraction", c.support_fraction);
  read_opt(j, "search_radius", c.search_radius);
  read_opt(j, "reassign_every", c.reassign_every);
  read_opt(j, "assign_margin", c.assign_margin);
  read_opt(j, "refine_lr", c.refine_lr);
  read_opt(j, "lr_decay", c.lr_decay);
  read_opt(j, "jobs", c.jobs);
}

void to_json(json& j, const Manifest& m) {
  json scenes = json::array();
  for (const auto& e : m.scenes) {
    scenes.push_back(json{{"id", e.id},
                          {"seed", e.seed},
                          {"files",
                           {{"frame1", e.id + "/frame1.png"},
                            {"frame2", e.id + "/frame2.png"},
                            {"mask1", e.id + "/mask1.png"},
                            {"mask2", e.id + "/mask2.png"},
                            {"fg_flow", e.id + "/fg.flo"},
                            {"bg_flow", e.id + "/bg.flo"},
                            {"params", e.id + "/params.json"}}}});
  }
  j = json{{"spec", m.spec}, {"scenes", scenes}};
}

void from_json(const json& j, Manifest& m) {
  if (j.contains("spec")) j.at("spec").get_to(m.spec);
  m.scenes.clear();
  for (const auto& e : j.at("scenes")) {
    m.scenes.push_back(ManifestEntry{e.at("id").get<std::string>(), e.at("seed").get<std::uint64_t>()});
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::format, path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
}

}  // namespace ldis
