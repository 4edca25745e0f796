#include "forge/image.hpp"

#include <cmath>
#include <cstdio>

#include "forge/errors.hpp"
#include "forge/rng.hpp"
#include "forge/sha256.hpp"

namespace forge {

ImageBuffer ImageBuffer::filled(int height, int width, int channels, double value) {
  ImageBuffer img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.assign(static_cast<std::size_t>(height) * width * channels, value);
  img.validate();
  return img;
}

void ImageBuffer::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0)
    throw ShapeError("ImageBuffer: non-positive dimensions");
  if (pixels.size() != static_cast<std::size_t>(height) * width * channels)
    throw ShapeError("ImageBuffer: storage does not match dimensions");
  for (double v : pixels) {
    if (!(v >= 0.0 && v <= 1.0))
      throw RangeError("ImageBuffer: pixel value outside [0,1]");
  }
}

bool same_shape(const ImageBuffer& a, const ImageBuffer& b) {
  return a.height == b.height && a.width == b.width && a.channels == b.channels;
}

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const std::string& context) {
  if (!same_shape(a, b)) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s: shape mismatch %dx%dx%d vs %dx%dx%d",
                  context.c_str(), a.height, a.width, a.channels, b.height, b.width,
                  b.channels);
    throw ShapeError(buf);
  }
}

ImageBuffer quantize8(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (double& v : out.pixels) v = static_cast<double>(std::lround(v * 255.0)) / 255.0;
  return out;
}

std::vector<std::uint8_t> to_bytes8(const ImageBuffer& img) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(img.pixels.size());
  for (double v : img.pixels)
    bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  return bytes;
}

std::string content_hash(const ImageBuffer& img) {
  Sha256 h;
  char header[64];
  std::snprintf(header, sizeof(header), "img:%dx%dx%d:", img.height, img.width,
                img.channels);
  h.update(header, std::char_traits<char>::length(header));
  const auto bytes = to_bytes8(img);
  h.update(bytes.data(), bytes.size());
  const auto d = h.digest();
  return to_hex(d);
}

ImageBuffer random_image(int height, int width, int channels, std::uint64_t seed,
                         double lo, double hi) {
  ImageBuffer img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.resize(static_cast<std::size_t>(height) * width * channels);
  Rng rng(seed);
  for (double& v : img.pixels) v = rng.uniform(lo, hi);
  img.validate();
  return img;
}

double linf_distance(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "linf_distance");
  double m = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    m = std::max(m, std::fabs(a.pixels[i] - b.pixels[i]));
  return m;
}

}  // namespace forge
