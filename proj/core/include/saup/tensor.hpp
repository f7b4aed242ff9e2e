#ifndef SAUP_TENSOR_HPP
#define SAUP_TENSOR_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "saup/error.hpp"

namespace saup {

// Dense [channels, height, width] array, row-major within each channel plane.
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }

  size_t size() const { return data.size(); }

  bool same_shape(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

// Pixel-space image; every value lies in [0, 1].
struct ImageTensor {
  Tensor3 values;

  ImageTensor() = default;
  explicit ImageTensor(Tensor3 t) : values(std::move(t)) {}
  ImageTensor(int c, int h, int w, double fill = 0.0) : values(c, h, w, fill) {}

  int channels() const { return values.channels; }
  int height() const { return values.height; }
  int width() const { return values.width; }

  // Throws if any value falls outside [0, 1].
  void validate() const;
};

// Per-channel affine normalization f_T: z = (x - mean) / std.
// Resizing is not part of the transform; images reach it at input_size.
struct NormalizationSpec {
  std::vector<double> mean;
  std::vector<double> std;
  int input_height = 0;
  int input_width = 0;

  // std must be strictly positive and channel counts must agree.
  void validate() const;

  static NormalizationSpec symmetric(int channels, int height, int width) {
    NormalizationSpec s;
    s.mean.assign(channels, 0.5);
    s.std.assign(channels, 0.5);
    s.input_height = height;
    s.input_width = width;
    return s;
  }
};

// Model-space representation Z with per-channel admissible bounds
// [f_T(0), f_T(1)].
struct NormalizedTensor {
  Tensor3 values;
  std::vector<double> lower_bound;  // per channel
  std::vector<double> upper_bound;  // per channel

  int channels() const { return values.channels; }
  int height() const { return values.height; }
  int width() const { return values.width; }

  // Throws if any value falls outside its channel's bounds.
  void validate() const;
};

// Z = f_T(x). Bounds are set to f_T(0) and f_T(1) per channel.
NormalizedTensor normalize(const ImageTensor& image, const NormalizationSpec& spec);

// x = f_T^{-1}(z): exact affine inverse, clamped to [0, 1]. The clamp is
// what makes the inverse "approximate" for out-of-range values.
ImageTensor denormalize(const NormalizedTensor& z, const NormalizationSpec& spec);

// Round every value to the nearest k/255. Idempotent.
ImageTensor quantize_to_8bit(const ImageTensor& image);

}  // namespace saup

#endif  // SAUP_TENSOR_HPP
