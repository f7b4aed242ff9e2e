#include <doctest.h>

#include <cmath>

#include "saup/masks.hpp"
#include "saup/rng.hpp"

using namespace saup;

namespace {

Tensor3 random_tensor(int c, int h, int w, Rng& rng, double lo, double hi) {
  Tensor3 t(c, h, w);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("reference-scale width rule") {
  CHECK(scaled_mask_width(6, 300, 300) == 6);
  CHECK(scaled_mask_width(6, 150, 150) == 3);
  CHECK(scaled_mask_width(6, 100, 100) == 2);
  CHECK(scaled_mask_width(6, 275, 275) == 6);  // 5.5 rounds up
  CHECK(scaled_mask_width(20, 300, 300) == 20);
  CHECK(scaled_mask_width(20, 40, 40) == 3);   // floor(2.67 + .5)
  CHECK(scaled_mask_width(1, 10, 10) == 1);    // clamped to >= 1
  CHECK(scaled_mask_width(6, 300, 600) == 6);  // min side governs
}

TEST_CASE("frame mask covers exactly 7056 pixels at the reference scale") {
  Mask m = make_frame_mask(1, 300, 300, 6);
  CHECK(m.active_count() == 7056);
  Mask m3 = make_frame_mask(3, 300, 300, 6);
  CHECK(m3.active_count() == 3 * 7056);
}

TEST_CASE("corner mask covers exactly 1600 pixels at the reference scale") {
  Mask m = make_corner_mask(1, 300, 300, 20);
  CHECK(m.active_count() == 1600);
  CHECK(make_corner_mask(1, 300, 300, 40).active_count() == 6400);
}

TEST_CASE("mask pixel counts at derived scales") {
  // 100x100, ref 6 -> width 2: 100^2 - 96^2 = 784.
  CHECK(make_frame_mask(1, 100, 100, 6).active_count() == 784);
  // 40x40, ref 20 -> corner side 3: 4 * 9 = 36.
  CHECK(make_corner_mask(1, 40, 40, 20).active_count() == 36);
}

TEST_CASE("mask geometry rejects degenerate sizes") {
  CHECK_THROWS_AS(make_frame_mask(1, 4, 4, 300), GeometryError);
  CHECK_THROWS_AS(make_corner_mask(1, 4, 4, 300), GeometryError);
  // Corners may exactly tile the image (2s == side).
  CHECK(make_corner_mask(1, 4, 4, 150).active_count() == 16);
  // Frame must keep an interior.
  Mask tight = make_frame_mask(1, 5, 5, 120);  // width 2, interior 1x1
  CHECK(tight.active_count() == 24);
}

TEST_CASE("masks are binary and identical across channels") {
  for (const Mask& m : {make_frame_mask(3, 64, 48, 6),
                        make_corner_mask(3, 64, 48, 20)}) {
    for (double v : m.values.data) CHECK((v == 0.0 || v == 1.0));
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        CHECK(m.values.at(0, y, x) == m.values.at(1, y, x));
        CHECK(m.values.at(0, y, x) == m.values.at(2, y, x));
      }
  }
}

TEST_CASE("apply never alters unmasked entries (normalized and pixel)") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    int h = 8 + static_cast<int>(rng.below(40));
    int w = 8 + static_cast<int>(rng.below(40));
    bool frame = rng.below(2) == 0;
    int ref = frame ? 3 + static_cast<int>(rng.below(20))
                    : 10 + static_cast<int>(rng.below(25));
    Mask mask;
    try {
      mask = frame ? make_frame_mask(2, h, w, ref)
                   : make_corner_mask(2, h, w, ref);
    } catch (const GeometryError&) {
      continue;  // random size/width combination was degenerate
    }

    NormalizedTensor z;
    z.values = random_tensor(2, h, w, rng, -2.0, 2.0);
    z.lower_bound = {-2.0, -2.0};
    z.upper_bound = {2.0, 2.0};
    Tensor3 delta = random_tensor(2, h, w, rng, -3.0, 3.0);
    NormalizedTensor out = apply_masked_perturbation(z, delta, mask);

    ImageTensor x(random_tensor(2, h, w, rng, 0.0, 1.0));
    Tensor3 delta_pix = random_tensor(2, h, w, rng, -0.5, 1.5);
    ImageTensor out_pix = apply_masked_perturbation_pixel(x, delta_pix, mask);

    for (size_t i = 0; i < z.values.data.size(); ++i) {
      if (mask.values.data[i] == 0.0) {
        CHECK(out.values.data[i] == z.values.data[i]);
        CHECK(out_pix.values.data[i] == x.values.data[i]);
      } else {
        CHECK(out.values.data[i] ==
              std::clamp(delta.data[i], z.lower_bound[i / (static_cast<size_t>(h) * w)],
                         z.upper_bound[i / (static_cast<size_t>(h) * w)]));
        CHECK(out_pix.values.data[i] == std::clamp(delta_pix.data[i], 0.0, 1.0));
      }
    }
  }
}

TEST_CASE("pixel-space and normalized-space application commute") {
  // normalize(apply_pixel(x, d, r)) == apply_normalized(normalize(x), f_T(d), r)
  // when the perturbation is already admissible (no clamping on either path).
  NormalizationSpec spec;
  spec.mean = {0.45, 0.5, 0.55};
  spec.std = {0.2, 0.25, 0.3};
  spec.input_height = 24;
  spec.input_width = 24;

  Rng rng(5);
  Mask mask = make_frame_mask(3, 24, 24, 30);
  ImageTensor x(random_tensor(3, 24, 24, rng, 0.0, 1.0));
  Tensor3 delta_pix = random_tensor(3, 24, 24, rng, 0.0, 1.0);

  ImageTensor delta_img(delta_pix);
  NormalizedTensor delta_norm = normalize(delta_img, spec);

  NormalizedTensor via_pixel =
      normalize(apply_masked_perturbation_pixel(x, delta_pix, mask), spec);
  NormalizedTensor via_norm =
      apply_masked_perturbation(normalize(x, spec), delta_norm.values, mask);

  for (size_t i = 0; i < via_pixel.values.data.size(); ++i)
    CHECK(via_pixel.values.data[i] ==
          doctest::Approx(via_norm.values.data[i]).epsilon(1e-6));
}

TEST_CASE("apply rejects shape mismatches") {
  Mask mask = make_frame_mask(1, 10, 10, 30);
  NormalizedTensor z;
  z.values = Tensor3(1, 10, 11, 0.0);
  z.lower_bound = {-1.0};
  z.upper_bound = {1.0};
  Tensor3 delta(1, 10, 10, 0.0);
  CHECK_THROWS_AS(apply_masked_perturbation(z, delta, mask), DimensionError);
}

TEST_CASE("resize_mask stays binary and preserves shape class") {
  Mask m = make_frame_mask(1, 300, 300, 6);
  Mask r = resize_mask(m, 150, 150);
  CHECK(r.height() == 150);
  CHECK(r.width() == 150);
  CHECK(r.shape == MaskShape::kFrame);
  for (double v : r.values.data) CHECK((v == 0.0 || v == 1.0));
  CHECK(r.values.at(0, 0, 0) == 1.0);       // border survives
  CHECK(r.values.at(0, 75, 75) == 0.0);     // interior stays clear
}

TEST_CASE("mask spec helpers") {
  CHECK(mask_shape_from_string("frame") == MaskShape::kFrame);
  CHECK(mask_shape_from_string("corner") == MaskShape::kCorner);
  CHECK_THROWS_AS(mask_shape_from_string("ring"), ConfigError);
  MaskSpec bad{MaskShape::kFrame, 0};
  CHECK_THROWS_AS(bad.validate(), GeometryError);
  Mask m = make_mask(MaskSpec{MaskShape::kCorner, 20}, 1, 300, 300);
  CHECK(m.active_count() == 1600);
}
