#include "ldis/imagery.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ldis {

namespace {

std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

bool has_extension(const std::filesystem::path& path, const char* ext) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return e == ext;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct RawPng {
  int width = 0;
  int height = 0;
  bool color = false;
  std::vector<std::uint8_t> pixels;  // RGB when color, else gray
};

RawPng read_png(const std::filesystem::path& path, bool want_gray) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  const auto bytes = read_bytes(path);
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::format, path.string() + ": " + image.message);
  }
  RawPng out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw Error(ErrorCode::format, path.string() + ": unsupported bit depth (16-bit)");
  }
  if (out.width == 0 || out.height == 0) {
    png_image_free(&image);
    throw Error(ErrorCode::format, path.string() + ": zero dimensions");
  }
  image.format = want_gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::format, path.string() + ": " + msg);
  }
  return out;
}

void write_png(const std::filesystem::path& path, int width, int height,
               bool color, const std::vector<std::uint8_t>& pixels) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), 0,
                               nullptr)) {
    throw Error(ErrorCode::io, "cannot write " + path.string() + ": " + image.message);
  }
}

// Skips whitespace and '#' comments in a PNM header.
std::size_t pnm_skip(const std::vector<std::uint8_t>& b, std::size_t pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  return pos;
}

long pnm_int(const std::vector<std::uint8_t>& b, std::size_t& pos,
             const std::filesystem::path& path) {
  pos = pnm_skip(b, pos);
  long v = 0;
  std::size_t start = pos;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > (1L << 30)) throw Error(ErrorCode::format, path.string() + ": header overflow");
    ++pos;
  }
  if (pos == start) throw Error(ErrorCode::format, path.string() + ": malformed PPM header");
  return v;
}

Image load_ppm(const std::filesystem::path& path) {
  const auto b = read_bytes(path);
  if (b.size() < 2 || b[0] != 'P' || b[1] != '6') {
    throw Error(ErrorCode::format, path.string() + ": not a binary PPM (P6)");
  }
  std::size_t pos = 2;
  const long w = pnm_int(b, pos, path);
  const long h = pnm_int(b, pos, path);
  const long maxval = pnm_int(b, pos, path);
  if (w == 0 || h == 0) throw Error(ErrorCode::format, path.string() + ": zero dimensions");
  if (maxval != 255) {
    throw Error(ErrorCode::format, path.string() + ": unsupported bit depth (maxval " +
                                       std::to_string(maxval) + ")");
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (pos + need > b.size()) throw Error(ErrorCode::format, path.string() + ": truncated");
  Image img(static_cast<int>(w), static_cast<int>(h));
  auto vals = img.values();
  for (std::size_t i = 0; i < need; ++i) vals[i] = b[pos + i] / 255.0;
  return img;
}

void save_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> raster(img.values().size());
  std::transform(img.values().begin(), img.values().end(), raster.begin(),
                 [](double v) { return static_cast<char>(quantize(v)); });
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
}

void put_f32(std::vector<char>& buf, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  for (int k = 0; k < 4; ++k) buf.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
}

void put_i32(std::vector<char>& buf, std::int32_t v) {
  auto bits = static_cast<std::uint32_t>(v);
  for (int k = 0; k < 4; ++k) buf.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t pos) {
  return static_cast<std::uint32_t>(b[pos]) | (static_cast<std::uint32_t>(b[pos + 1]) << 8) |
         (static_cast<std::uint32_t>(b[pos + 2]) << 16) |
         (static_cast<std::uint32_t>(b[pos + 3]) << 24);
}

constexpr float kFloMagic = 202021.25f;

}  // namespace

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

Image load_image(const std::filesystem::path& path) {
  if (has_extension(path, ".ppm")) return load_ppm(path);
  const RawPng png = read_png(path, false);
  Image img(png.width, png.height);
  auto vals = img.values();
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = png.pixels[i] / 255.0;
  return img;
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw Error(ErrorCode::invalid_argument, "cannot save an empty image");
  if (has_extension(path, ".ppm")) {
    save_ppm(img, path);
    return;
  }
  std::vector<std::uint8_t> px(img.values().size());
  std::transform(img.values().begin(), img.values().end(), px.begin(), quantize);
  write_png(path, img.width(), img.height(), true, px);
}

Mask load_mask(const std::filesystem::path& path) {
  const RawPng png = read_png(path, true);
  if (png.color) throw Error(ErrorCode::format, path.string() + ": mask is not grayscale");
  Mask mask(png.width, png.height);
  auto vals = mask.values();
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = png.pixels[i] > 127 ? 1 : 0;
  return mask;
}

void save_mask(const Mask& mask, const std::filesystem::path& path) {
  if (mask.empty()) throw Error(ErrorCode::invalid_argument, "cannot save an empty mask");
  std::vector<std::uint8_t> px(mask.values().size());
  std::transform(mask.values().begin(), mask.values().end(), px.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
  write_png(path, mask.width(), mask.height(), false, px);
}

void save_field_png(const AlphaField& field, const std::filesystem::path& path) {
  std::vector<std::uint8_t> px(field.values().size());
  std::transform(field.values().begin(), field.values().end(), px.begin(), quantize);
  write_png(path, field.width(), field.height(), false, px);
}

FlowField load_flow(const std::filesystem::path& path) {
  const auto b = read_bytes(path);
  if (b.size() < 12) throw Error(ErrorCode::format, path.string() + ": truncated header");
  if (std::bit_cast<float>(get_u32(b, 0)) != kFloMagic) {
    throw Error(ErrorCode::format, path.string() + ": bad magic");
  }
  const auto w = static_cast<std::int32_t>(get_u32(b, 4));
  const auto h = static_cast<std::int32_t>(get_u32(b, 8));
  if (w <= 0 || h <= 0) throw Error(ErrorCode::format, path.string() + ": zero dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * h * 2;
  if (b.size() < 12 + 4 * n) throw Error(ErrorCode::format, path.string() + ": truncated payload");
  FlowField flow(w, h);
  auto vals = flow.values();
  for (std::size_t i = 0; i < n; ++i) {
    vals[i] = static_cast<double>(std::bit_cast<float>(get_u32(b, 12 + 4 * i)));
  }
  if (!all_finite(vals)) throw Error(ErrorCode::non_finite, path.string() + ": non-finite flow");
  return flow;
}

void save_flow(const FlowField& flow, const std::filesystem::path& path) {
  if (flow.empty()) throw Error(ErrorCode::invalid_argument, "cannot save an empty flow");
  std::vector<char> buf;
  buf.reserve(12 + 4 * flow.values().size());
  put_f32(buf, kFloMagic);
  put_i32(buf, flow.width());
  put_i32(buf, flow.height());
  for (double v : flow.values()) put_f32(buf, static_cast<float>(v));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
}

}  // namespace ldis
