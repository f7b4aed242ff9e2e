#ifndef SAUP_MASKS_HPP
#define SAUP_MASKS_HPP

#include <cstdint>
#include <string>

#include "saup/tensor.hpp"

namespace saup {

enum class MaskShape { kFrame, kCorner };

MaskShape mask_shape_from_string(const std::string& name);
std::string to_string(MaskShape shape);

// Shape + width at the 300x300 reference scale; concrete masks are built per
// image size from this.
struct MaskSpec {
  MaskShape shape = MaskShape::kFrame;
  int reference_width = 6;

  void validate() const;  // reference_width >= 1
};

// Binary {0,1} mask over [C,H,W]; identical across channels.
struct Mask {
  Tensor3 values;
  MaskShape shape = MaskShape::kFrame;
  int reference_width = 0;  // width parameter at the 300x300 reference scale

  int channels() const { return values.channels; }
  int height() const { return values.height; }
  int width() const { return values.width; }

  // Number of masked scalar entries across all channels.
  int64_t active_count() const;
};

// Scale a reference-size width parameter to a concrete image side:
// w = floor(ref * min(H, W) / 300 + 0.5), clamped to at least 1.
int scaled_mask_width(int reference_width, int height, int width);

// Border frame of thickness scaled_mask_width(...). Throws GeometryError if
// the frame would cover the whole image (2w >= min side leaves no interior).
Mask make_frame_mask(int channels, int height, int width, int reference_width);

// Four s x s corner squares with s = scaled_mask_width(...). Throws
// GeometryError if opposite corners would overlap (2s > min side).
Mask make_corner_mask(int channels, int height, int width, int reference_width);

Mask make_mask(MaskShape shape, int channels, int height, int width,
               int reference_width);
Mask make_mask(const MaskSpec& spec, int channels, int height, int width);

// Nearest-neighbour resize of a binary mask to a new spatial size.
Mask resize_mask(const Mask& mask, int new_height, int new_width);

// Z' = Z outside the mask; clamp(delta, bounds) inside. Unmasked entries are
// copied bit-identically from z.
NormalizedTensor apply_masked_perturbation(const NormalizedTensor& z,
                                           const Tensor3& delta,
                                           const Mask& mask);

// Pixel-space analogue used on the evaluation path: x' = x outside the mask,
// clamp(delta_pixel, [0,1]) inside.
ImageTensor apply_masked_perturbation_pixel(const ImageTensor& x,
                                            const Tensor3& delta_pixel,
                                            const Mask& mask);

}  // namespace saup

#endif  // SAUP_MASKS_HPP
