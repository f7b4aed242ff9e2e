#include "saup/masks.hpp"

#include <algorithm>
#include <cmath>

namespace saup {

MaskShape mask_shape_from_string(const std::string& name) {
  if (name == "frame") return MaskShape::kFrame;
  if (name == "corner") return MaskShape::kCorner;
  throw ConfigError("unknown mask shape '" + name + "' (frame|corner)");
}

std::string to_string(MaskShape shape) {
  return shape == MaskShape::kFrame ? "frame" : "corner";
}

void MaskSpec::validate() const {
  if (reference_width < 1)
    throw GeometryError("mask reference width must be >= 1, got " +
                        std::to_string(reference_width));
}

int64_t Mask::active_count() const {
  int64_t n = 0;
  for (double v : values.data) n += (v != 0.0);
  return n;
}

int scaled_mask_width(int reference_width, int height, int width) {
  if (reference_width < 1)
    throw GeometryError("mask reference width must be >= 1");
  if (height < 1 || width < 1)
    throw GeometryError("mask target size must be positive");
  int side = std::min(height, width);
  int w = static_cast<int>(
      std::floor(reference_width * static_cast<double>(side) / 300.0 + 0.5));
  return std::max(w, 1);
}

namespace {

Mask blank_mask(MaskShape shape, int channels, int height, int width,
                int reference_width) {
  if (channels < 1) throw GeometryError("mask needs >= 1 channel");
  Mask m;
  m.values = Tensor3(channels, height, width, 0.0);
  m.shape = shape;
  m.reference_width = reference_width;
  return m;
}

}  // namespace

Mask make_frame_mask(int channels, int height, int width, int reference_width) {
  int w = scaled_mask_width(reference_width, height, width);
  if (2 * w >= std::min(height, width))
    throw GeometryError("frame width " + std::to_string(w) + " leaves no " +
                        std::to_string(height) + "x" + std::to_string(width) +
                        " interior");
  Mask m = blank_mask(MaskShape::kFrame, channels, height, width, reference_width);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (y < w || y >= height - w || x < w || x >= width - w)
          m.values.at(c, y, x) = 1.0;
  return m;
}

Mask make_corner_mask(int channels, int height, int width, int reference_width) {
  int s = scaled_mask_width(reference_width, height, width);
  if (2 * s > std::min(height, width))
    throw GeometryError("corner size " + std::to_string(s) +
                        " overlaps on a " + std::to_string(height) + "x" +
                        std::to_string(width) + " image");
  Mask m =
      blank_mask(MaskShape::kCorner, channels, height, width, reference_width);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        bool top = y < s, bottom = y >= height - s;
        bool left = x < s, right = x >= width - s;
        if ((top || bottom) && (left || right)) m.values.at(c, y, x) = 1.0;
      }
  return m;
}

Mask make_mask(MaskShape shape, int channels, int height, int width,
               int reference_width) {
  return shape == MaskShape::kFrame
             ? make_frame_mask(channels, height, width, reference_width)
             : make_corner_mask(channels, height, width, reference_width);
}

Mask make_mask(const MaskSpec& spec, int channels, int height, int width) {
  spec.validate();
  return make_mask(spec.shape, channels, height, width, spec.reference_width);
}

Mask resize_mask(const Mask& mask, int new_height, int new_width) {
  if (new_height < 1 || new_width < 1)
    throw GeometryError("resize_mask: target size must be positive");
  Mask out = blank_mask(mask.shape, mask.channels(), new_height, new_width,
                        mask.reference_width);
  for (int c = 0; c < mask.channels(); ++c)
    for (int y = 0; y < new_height; ++y)
      for (int x = 0; x < new_width; ++x) {
        int sy = std::min(mask.height() - 1,
                          static_cast<int>(y * static_cast<double>(mask.height()) /
                                           new_height));
        int sx = std::min(mask.width() - 1,
                          static_cast<int>(x * static_cast<double>(mask.width()) /
                                           new_width));
        out.values.at(c, y, x) = mask.values.at(c, sy, sx) != 0.0 ? 1.0 : 0.0;
      }
  return out;
}

NormalizedTensor apply_masked_perturbation(const NormalizedTensor& z,
                                           const Tensor3& delta,
                                           const Mask& mask) {
  if (!z.values.same_shape(delta) || !z.values.same_shape(mask.values))
    throw DimensionError("apply_masked_perturbation: shape mismatch");
  NormalizedTensor out = z;  // unmasked entries copied bit-identically
  for (int c = 0; c < z.channels(); ++c) {
    double lo = z.lower_bound[c], hi = z.upper_bound[c];
    for (int y = 0; y < z.height(); ++y)
      for (int x = 0; x < z.width(); ++x)
        if (mask.values.at(c, y, x) != 0.0)
          out.values.at(c, y, x) = std::clamp(delta.at(c, y, x), lo, hi);
  }
  return out;
}

ImageTensor apply_masked_perturbation_pixel(const ImageTensor& x,
                                            const Tensor3& delta_pixel,
                                            const Mask& mask) {
  if (!x.values.same_shape(delta_pixel) || !x.values.same_shape(mask.values))
    throw DimensionError("apply_masked_perturbation_pixel: shape mismatch");
  ImageTensor out = x;
  for (int c = 0; c < x.channels(); ++c)
    for (int y = 0; y < x.height(); ++y)
      for (int xx = 0; xx < x.width(); ++xx)
        if (mask.values.at(c, y, xx) != 0.0)
          out.values.at(c, y, xx) =
              std::clamp(delta_pixel.at(c, y, xx), 0.0, 1.0);
  return out;
}

}  // namespace saup
