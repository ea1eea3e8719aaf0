#include "van/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace van {

namespace {

void require_image(const Image& image, const char* what) {
  if (image.rank() != 3) throw std::invalid_argument(std::string(what) + ": image must be (H, W, C)");
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

Image resize_bilinear(const Image& image, std::size_t height, std::size_t width) {
  require_image(image, "resize_bilinear");
  if (height == 0 || width == 0) throw std::invalid_argument("resize_bilinear: target size must be positive");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Image out({height, width, c});
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = image.at(y0, x0, ch) * (1 - tx) + image.at(y0, x1, ch) * tx;
        const double bottom = image.at(y1, x0, ch) * (1 - tx) + image.at(y1, x1, ch) * tx;
        out.at(y, x, ch) = top * (1 - ty) + bottom * ty;
      }
    }
  }
  return out;
}

Image pad_bottom_right(const Image& image, std::size_t height, std::size_t width) {
  require_image(image, "pad_bottom_right");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (height < h || width < w) throw std::invalid_argument("pad_bottom_right: target smaller than image");
  if (height == h && width == w) return image;
  Image out({height, width, c}, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    std::copy_n(image.data().begin() + static_cast<std::ptrdiff_t>(y * w * c), w * c,
                out.data().begin() + static_cast<std::ptrdiff_t>(y * width * c));
  return out;
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(out[i]) / 255.0;
  return out;
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  require_image(image, "write_pgm");
  if (image.dim(2) != 1) throw std::invalid_argument("write_pgm: only single-channel images");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  std::vector<char> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) bytes[i] = static_cast<char>(to_byte(image[i]));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string token = header_token(in);
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw std::runtime_error(path.string() + ": malformed PGM header");
  }
  return std::stoul(token);
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  if (header_token(in) != "P5") throw std::runtime_error(path.string() + ": not a binary PGM (P5) file");
  const std::size_t width = header_number(in, path);
  const std::size_t height = header_number(in, path);
  const std::size_t maxval = header_number(in, path);
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
    throw std::runtime_error(path.string() + ": invalid PGM dimensions or maxval");
  }
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(width * height * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw std::runtime_error(path.string() + ": truncated PGM data");
  Image image({height, width, 1});
  for (std::size_t i = 0; i < width * height; ++i) {
    const std::size_t v = bytes_per == 1 ? raw[i] : (static_cast<std::size_t>(raw[2 * i]) << 8) | raw[2 * i + 1];
    image[i] = std::min(1.0, static_cast<double>(v) / static_cast<double>(maxval));
  }
  return image;
}

}  // namespace van
