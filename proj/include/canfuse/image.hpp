#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "canfuse/error.hpp"

namespace canfuse {

// Decoded pixel grid, row-major (h, w, c), values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;  // 1 (gray) or 3 (rgb)
  std::vector<double> pixels;

  static Image zeros(std::size_t h, std::size_t w, std::size_t c) {
    Image img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.pixels.assign(h * w * c, 0.0);
    return img;
  }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

namespace detail {

// next whitespace-delimited header token, skipping '#' comments
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) fail(errc::truncated_file, "PNM header ended early");
  return tok;
}

inline std::size_t pnm_number(std::istream& in) {
  const std::string tok = pnm_token(in);
  std::size_t value = 0;
  for (const char c : tok) {
    if (c < '0' || c > '9') fail(errc::unsupported_format, "bad PNM header token '" + tok + "'");
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

}  // namespace detail

// Binary PGM (P5) or PPM (P6), maxval 255 only. Pixels scale to byte/255.
inline Image decode_pnm(std::istream& in) {
  const std::string magic = detail::pnm_token(in);
  std::size_t channels = 0;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else fail(errc::unsupported_format, "expected P5 or P6, got '" + magic + "'");

  const std::size_t width = detail::pnm_number(in);
  const std::size_t height = detail::pnm_number(in);
  const std::size_t maxval = detail::pnm_number(in);
  if (maxval != 255) fail(errc::bad_maxval, "only maxval 255 supported, got " + std::to_string(maxval));
  if (width == 0 || height == 0) fail(errc::unsupported_format, "zero image dimension");
  // exactly one whitespace byte separates header from raster; pnm_number
  // already consumed it as the token terminator

  const std::size_t count = height * width * channels;
  std::vector<std::uint8_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    fail(errc::truncated_file, "PNM raster shorter than header promises");
  }

  Image img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) img.pixels[i] = raw[i] / 255.0;
  return img;
}

inline Image load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::truncated_file, "cannot open image '" + path + "'");
  return decode_pnm(in);
}

// Quantizes to bytes (round, clamp) and writes P5/P6 with maxval 255.
inline void write_pnm(std::ostream& out, const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    fail(errc::unsupported_format, "write_pnm: channels must be 1 or 3");
  }
  out << (img.channels == 1 ? "P5" : "P6") << '\n'
      << img.width << ' ' << img.height << '\n'
      << "255\n";
  std::vector<std::uint8_t> raw(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double q = std::round(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0);
    raw[i] = static_cast<std::uint8_t>(q);
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
}

inline void save_image(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::truncated_file, "cannot open '" + path + "' for writing");
  write_pnm(out, img);
}

// Corner-aligned bilinear resampling. Output stays inside the input's value
// range (convex combination), clamped to [0, 1] against rounding residue.
inline Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) fail(errc::zero_dimension, "resize_bilinear: zero output dimension");
  if (img.height == 0 || img.width == 0 || img.pixels.empty()) {
    fail(errc::empty_input, "resize_bilinear: empty image");
  }
  if (out_h == img.height && out_w == img.width) return img;

  Image out = Image::zeros(out_h, out_w, img.channels);
  const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;

  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double fy = oy * sy;
    const std::size_t y0 = std::min(static_cast<std::size_t>(fy), img.height - 1);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double fx = ox * sx;
      const std::size_t x0 = std::min(static_cast<std::size_t>(fx), img.width - 1);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
        out.at(oy, ox, c) = std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace canfuse
