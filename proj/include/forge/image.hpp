#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace forge {

// H x W x C image with unit-interval pixels, row-major, channel-fastest.
// The shape of an image never changes once it enters the pipeline; stages
// produce new buffers instead of resizing.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> pixels;

  static ImageBuffer filled(int height, int width, int channels, double value);

  std::size_t size() const { return pixels.size(); }

  double& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  // Throws ShapeError if dims and storage disagree, RangeError if any pixel
  // leaves [0,1].
  void validate() const;
};

bool same_shape(const ImageBuffer& a, const ImageBuffer& b);

// Throws ShapeError unless a and b share a shape.
void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const std::string& context);

// Snap every pixel to the nearest 1/255 grid point.
ImageBuffer quantize8(const ImageBuffer& img);

// 8-bit quantized byte view (what a lossless 8-bit encoder would store).
std::vector<std::uint8_t> to_bytes8(const ImageBuffer& img);

// Provenance hash: dims header plus the 8-bit quantized pixel bytes, so the
// hash is stable across lossless 8-bit round trips.
std::string content_hash(const ImageBuffer& img);

// Deterministic pseudo-random test/clean image with pixels in [lo, hi].
ImageBuffer random_image(int height, int width, int channels, std::uint64_t seed,
                         double lo = 0.0, double hi = 1.0);

double linf_distance(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace forge
