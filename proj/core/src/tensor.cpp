#include "saup/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace saup {

namespace {

std::string shape_string(const Tensor3& t) {
  return "[" + std::to_string(t.channels) + "," + std::to_string(t.height) +
         "," + std::to_string(t.width) + "]";
}

void check_shape_positive(const Tensor3& t, const char* what) {
  if (t.channels <= 0 || t.height <= 0 || t.width <= 0)
    throw DimensionError(std::string(what) + ": empty shape " + shape_string(t));
  if (t.data.size() != static_cast<size_t>(t.channels) * t.height * t.width)
    throw DimensionError(std::string(what) + ": data size " +
                         std::to_string(t.data.size()) +
                         " does not match shape " + shape_string(t));
}

}  // namespace

void ImageTensor::validate() const {
  check_shape_positive(values, "ImageTensor");
  for (size_t i = 0; i < values.data.size(); ++i) {
    double v = values.data[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw InputError("ImageTensor: value " + std::to_string(v) +
                       " at flat index " + std::to_string(i) +
                       " outside [0,1]");
  }
}

void NormalizationSpec::validate() const {
  if (mean.empty() || mean.size() != std.size())
    throw DimensionError("NormalizationSpec: mean/std channel counts differ (" +
                         std::to_string(mean.size()) + " vs " +
                         std::to_string(std.size()) + ")");
  if (input_height <= 0 || input_width <= 0)
    throw DimensionError("NormalizationSpec: non-positive input size");
  for (size_t c = 0; c < std.size(); ++c)
    if (!(std[c] > 0.0))
      throw SpecError("NormalizationSpec: std[" + std::to_string(c) +
                      "] = " + std::to_string(std[c]) +
                      " must be strictly positive");
}

void NormalizedTensor::validate() const {
  check_shape_positive(values, "NormalizedTensor");
  if (lower_bound.size() != static_cast<size_t>(values.channels) ||
      upper_bound.size() != static_cast<size_t>(values.channels))
    throw DimensionError("NormalizedTensor: bound count does not match channels");
  for (int c = 0; c < values.channels; ++c)
    for (int y = 0; y < values.height; ++y)
      for (int x = 0; x < values.width; ++x) {
        double v = values.at(c, y, x);
        if (!(v >= lower_bound[c] && v <= upper_bound[c]))
          throw InputError("NormalizedTensor: value " + std::to_string(v) +
                           " at (" + std::to_string(c) + "," +
                           std::to_string(y) + "," + std::to_string(x) +
                           ") outside channel bounds [" +
                           std::to_string(lower_bound[c]) + "," +
                           std::to_string(upper_bound[c]) + "]");
      }
}

NormalizedTensor normalize(const ImageTensor& image,
                           const NormalizationSpec& spec) {
  spec.validate();
  image.validate();
  const Tensor3& x = image.values;
  if (x.channels != static_cast<int>(spec.mean.size()))
    throw DimensionError("normalize: image has " + std::to_string(x.channels) +
                         " channels, spec has " +
                         std::to_string(spec.mean.size()));
  NormalizedTensor z;
  z.values = Tensor3(x.channels, x.height, x.width);
  z.lower_bound.resize(x.channels);
  z.upper_bound.resize(x.channels);
  for (int c = 0; c < x.channels; ++c) {
    z.lower_bound[c] = (0.0 - spec.mean[c]) / spec.std[c];
    z.upper_bound[c] = (1.0 - spec.mean[c]) / spec.std[c];
    for (int y = 0; y < x.height; ++y)
      for (int xx = 0; xx < x.width; ++xx)
        z.values.at(c, y, xx) = (x.at(c, y, xx) - spec.mean[c]) / spec.std[c];
  }
  return z;
}

ImageTensor denormalize(const NormalizedTensor& z,
                        const NormalizationSpec& spec) {
  spec.validate();
  check_shape_positive(z.values, "denormalize");
  if (z.values.channels != static_cast<int>(spec.mean.size()))
    throw DimensionError("denormalize: tensor has " +
                         std::to_string(z.values.channels) +
                         " channels, spec has " +
                         std::to_string(spec.mean.size()));
  ImageTensor out(z.values.channels, z.values.height, z.values.width);
  for (int c = 0; c < z.values.channels; ++c)
    for (int y = 0; y < z.values.height; ++y)
      for (int x = 0; x < z.values.width; ++x) {
        double v = z.values.at(c, y, x) * spec.std[c] + spec.mean[c];
        out.values.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
  return out;
}

ImageTensor quantize_to_8bit(const ImageTensor& image) {
  image.validate();
  ImageTensor out = image;
  for (double& v : out.values.data) {
    v = std::round(v * 255.0) / 255.0;
  }
  return out;
}

}  // namespace saup
