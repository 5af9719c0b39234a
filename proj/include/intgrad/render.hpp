#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "intgrad/error.hpp"
#include "intgrad/tensor.hpp"

namespace intgrad {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 255;
  /// Row-major samples in [0, maxval].
  std::vector<std::uint16_t> pixels;
};

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  /// Row-major interleaved R, G, B.
  std::vector<std::uint8_t> rgb;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Heatmap geometry: height x width, with an optional trailing channel axis
/// that is summed away.
struct RenderShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
};

namespace detail {

class PnmReader {
 public:
  explicit PnmReader(std::string_view data) : data_(data) {}

  void skip_space() {
    while (pos_ < data_.size()) {
      const char c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space();
    std::size_t v = 0;
    const auto* first = data_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, data_.data() + data_.size(), v);
    if (ec != std::errc() || ptr == first) throw ValidationError(std::string("PGM header: bad ") + what);
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  std::string_view take(std::size_t n) {
    if (data_.size() - pos_ < n) throw ValidationError("PGM raster is truncated");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t pos_ = 0;
  std::string_view data_;
};

}  // namespace detail

/// Parses a binary (P5) PGM with 8- or 16-bit samples.
inline GrayImage read_pgm(std::string_view data) {
  if (data.substr(0, 2) != "P5") throw ValidationError("not a binary PGM (missing P5 magic)");
  detail::PnmReader in(data.substr(2));
  GrayImage img;
  img.width = in.number("width");
  img.height = in.number("height");
  const auto maxval = in.number("maxval");
  if (img.width == 0 || img.height == 0) throw ValidationError("PGM has zero size");
  if (maxval == 0 || maxval > 65535) throw ValidationError("PGM maxval must lie in [1, 65535]");
  img.maxval = static_cast<unsigned>(maxval);
  if (in.pos_ >= in.data_.size()) throw ValidationError("PGM raster is truncated");
  ++in.pos_;  // single whitespace byte before the raster
  const std::size_t count = img.width * img.height;
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  const auto raster = in.take(count * bytes);
  img.pixels.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto hi = static_cast<unsigned char>(raster[k * bytes]);
    const unsigned v = bytes == 2 ? (hi << 8) | static_cast<unsigned char>(raster[k * 2 + 1]) : hi;
    if (v > maxval) throw ValidationError("PGM sample exceeds maxval");
    img.pixels[k] = static_cast<std::uint16_t>(v);
  }
  return img;
}

inline std::string write_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                    std::to_string(img.maxval) + "\n";
  for (auto v : img.pixels) {
    if (img.maxval > 255) out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

/// Pixel values divided by maxval, flattened row-major.
inline Tensor pgm_to_input(const GrayImage& img) {
  std::vector<double> v(img.pixels.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(img.pixels[k]) / img.maxval;
  return Tensor::vector(std::move(v));
}

/// Binary PPM; a non-empty `comment` becomes a '#' line in the header.
inline std::string write_ppm(const RgbImage& img, std::string_view comment = {}) {
  std::string out = "P6\n";
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(img.rgb.begin(), img.rgb.end());
  return out;
}

inline RgbImage read_ppm(std::string_view data) {
  if (data.substr(0, 2) != "P6") throw ValidationError("not a binary PPM (missing P6 magic)");
  detail::PnmReader in(data.substr(2));
  RgbImage img;
  img.width = in.number("width");
  img.height = in.number("height");
  if (in.number("maxval") != 255) throw ValidationError("only 8-bit PPM is supported");
  ++in.pos_;
  const auto raster = in.take(img.width * img.height * 3);
  img.rgb.assign(raster.begin(), raster.end());
  return img;
}

/// Parses "HxW" or "HxWxC".
inline RenderShape parse_shape(std::string_view text) {
  std::vector<std::size_t> dims;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('x', start), text.size());
    const auto part = text.substr(start, end - start);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc() || ptr != part.data() + part.size() || v == 0) {
      throw ValidationError("shape must look like HxW or HxWxC with positive extents, got '" +
                            std::string(text) + "'");
    }
    dims.push_back(v);
    start = end + 1;
  }
  if (dims.size() != 2 && dims.size() != 3) {
    throw ValidationError("shape must look like HxW or HxWxC, got '" + std::string(text) + "'");
  }
  return {dims[0], dims[1], dims.size() == 3 ? dims[2] : 1};
}

/// Sums the trailing channel axis: one value per pixel.
inline std::vector<double> aggregate_channels(const std::vector<double>& values, const RenderShape& shape) {
  const std::size_t pixels = shape.height * shape.width;
  if (values.size() != pixels * shape.channels) {
    throw ValidationError("shape " + std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
                          std::to_string(shape.channels) + " holds " + std::to_string(pixels * shape.channels) +
                          " values but the attribution has " + std::to_string(values.size()));
  }
  std::vector<double> out(pixels, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t c = 0; c < shape.channels; ++c) out[p] += values[p * shape.channels + c];
  }
  return out;
}

inline constexpr std::uint8_t kMidGray = 128;

/// max |a| over the aggregated map; 0 means the render is the plain base.
inline double heatmap_divisor(const std::vector<double>& aggregated) {
  double m = 0.0;
  for (double v : aggregated) m = std::max(m, std::abs(v));
  return m;
}

/// Overlays attributions on a gray base: positive mass blends toward green,
/// negative toward red, with weight |a| / max|a|. A pixel holding the
/// maximum is pure green (or pure red).
inline RgbImage render_heatmap(const std::vector<double>& values, const RenderShape& shape,
                               const GrayImage* base = nullptr) {
  const auto a = aggregate_channels(values, shape);
  if (base && (base->width != shape.width || base->height != shape.height)) {
    throw ValidationError("base image is " + std::to_string(base->height) + "x" + std::to_string(base->width) +
                          " but the heatmap is " + std::to_string(shape.height) + "x" +
                          std::to_string(shape.width));
  }
  const double divisor = heatmap_divisor(a);
  RgbImage img{shape.width, shape.height, std::vector<std::uint8_t>(a.size() * 3)};
  for (std::size_t p = 0; p < a.size(); ++p) {
    const double gray = base ? std::round(255.0 * base->pixels[p] / base->maxval) : kMidGray;
    const double alpha = divisor > 0.0 ? std::abs(a[p]) / divisor : 0.0;
    const double dimmed = gray * (1.0 - alpha);
    const double lit = dimmed + 255.0 * alpha;
    const auto to_byte = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
    img.rgb[3 * p + 0] = to_byte(a[p] < 0.0 ? lit : dimmed);
    img.rgb[3 * p + 1] = to_byte(a[p] > 0.0 ? lit : dimmed);
    img.rgb[3 * p + 2] = to_byte(dimmed);
  }
  return img;
}

}  // namespace intgrad
