#pragma once

// Trait-extraction geometry: in-plane rotation normalization from the eye
// keypoints, rectangular trait crops, and rubber-sheet normalization of the
// iris annulus into a fixed-size (radial x angular) rectangle with a validity
// mask. Image frame: x to the right, y down, pixel (x, y) at integer coords.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fusebench/core.hpp"
#include "fusebench/error.hpp"

namespace fusebench {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(b.x - a.x, b.y - a.y); }

// Row-major single-channel image. Intensities are nominally in [0, 1]; only
// finiteness is enforced so analytic test fields can exceed that range.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ShapeError("image dimensions must be >= 1");
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  GrayImage(int width, int height, std::vector<double> pixels) : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) throw ShapeError("image dimensions must be >= 1");
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw ShapeError("pixel count does not match image dimensions");
    }
    for (double v : pixels_) {
      if (!std::isfinite(v)) throw IngestError("image contains non-finite intensities");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  const std::vector<double>& pixels() const { return pixels_; }

  double& at(int x, int y) { return pixels_[index(x, y)]; }
  double at(int x, int y) const { return pixels_[index(x, y)]; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  double mean() const {
    double s = 0.0;
    for (double v : pixels_) s += v;
    return pixels_.empty() ? 0.0 : s / static_cast<double>(pixels_.size());
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

struct BilinearSample {
  double value = 0.0;
  bool valid = false;
};

// Bilinear interpolation. Points outside [0, W-1] x [0, H-1] read as 0 and
// are reported invalid.
inline BilinearSample bilinear(const GrayImage& img, double x, double y) {
  constexpr double kEdge = 1e-9;
  const double max_x = img.width() - 1;
  const double max_y = img.height() - 1;
  if (!(x >= -kEdge && y >= -kEdge && x <= max_x + kEdge && y <= max_y + kEdge)) return {0.0, false};
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
  const double bottom = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
  return {top * (1.0 - fy) + bottom * fy, true};
}

// ---------------------------------------------------------------------------
// Rotation normalization

struct FaceKeypoints {
  Point2 left_eye;
  Point2 right_eye;
  Point2 nose_center;
  Point2 left_eyebrow_center;
};

// Angle of the left-eye -> right-eye segment, atan2(dy, dx).
inline double rotation_angle(Point2 left_eye, Point2 right_eye) {
  const double dx = right_eye.x - left_eye.x;
  const double dy = right_eye.y - left_eye.y;
  if (dx == 0.0 && dy == 0.0) throw GeometryError("rotation_angle: eye keypoints coincide");
  return std::atan2(dy, dx);
}

// Rotation by `angle` (radians, image frame) about `center`.
inline Point2 rotate_about(Point2 p, Point2 center, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double dx = p.x - center.x;
  const double dy = p.y - center.y;
  return {center.x + c * dx - s * dy, center.y + s * dx + c * dy};
}

inline FaceKeypoints rotate_keypoints(const FaceKeypoints& k, Point2 center, double angle) {
  return {rotate_about(k.left_eye, center, angle), rotate_about(k.right_eye, center, angle),
          rotate_about(k.nose_center, center, angle), rotate_about(k.left_eyebrow_center, center, angle)};
}

// Resamples `image` so that content at p moves to rotate_about(p, center, angle).
// `valid` receives 1 where the source sample was in bounds.
inline GrayImage rotate_image(const GrayImage& image, Point2 center, double angle, GrayImage* valid = nullptr) {
  GrayImage out(image.width(), image.height());
  if (valid) *valid = GrayImage(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const Point2 src = rotate_about({static_cast<double>(x), static_cast<double>(y)}, center, -angle);
      const auto s = bilinear(image, src.x, src.y);
      out.at(x, y) = s.value;
      if (valid) valid->at(x, y) = s.valid ? 1.0 : 0.0;
    }
  }
  return out;
}

struct RotatedFace {
  GrayImage image;
  GrayImage valid;  // 1 where the output pixel came from inside the source
  FaceKeypoints keypoints;
  double angle = 0.0;  // rotation that was undone
};

inline constexpr double kIdentityAngle = 1e-12;

// Rotates the face about the eye midpoint so the eye segment is horizontal
// with the left eye on the left. Angles below 1e-12 skip resampling, so an
// already-level face comes back bit-identical.
inline RotatedFace normalize_rotation(const GrayImage& image, const FaceKeypoints& kp) {
  const double angle = rotation_angle(kp.left_eye, kp.right_eye);
  for (const Point2& p : {kp.left_eye, kp.right_eye, kp.nose_center, kp.left_eyebrow_center}) {
    if (!(p.x >= 0 && p.y >= 0 && p.x <= image.width() - 1 && p.y <= image.height() - 1)) {
      throw GeometryError("normalize_rotation: keypoint outside image bounds");
    }
  }
  RotatedFace out;
  out.angle = angle;
  if (std::abs(angle) < kIdentityAngle) {
    out.image = image;
    out.valid = GrayImage(image.width(), image.height(), 1.0);
    out.keypoints = kp;
    return out;
  }
  const Point2 mid{(kp.left_eye.x + kp.right_eye.x) / 2.0, (kp.left_eye.y + kp.right_eye.y) / 2.0};
  out.image = rotate_image(image, mid, -angle, &out.valid);
  out.keypoints = rotate_keypoints(kp, mid, -angle);
  return out;
}

// ---------------------------------------------------------------------------
// Crops

struct CropSpec {
  Point2 center;
  int width = 1;
  int height = 1;
};

struct CropResult {
  GrayImage image;
  double clipped_fraction = 0.0;  // share of the window that fell outside the source
};

// Window of spec.width x spec.height with top-left round(center) - floor(size/2).
// Rounding is half-up. Out-of-bounds pixels are 0.
inline CropResult crop(const GrayImage& image, const CropSpec& spec) {
  if (spec.width < 1 || spec.height < 1) throw GeometryError("crop: width and height must be >= 1");
  const int left = static_cast<int>(std::floor(spec.center.x + 0.5)) - spec.width / 2;
  const int top = static_cast<int>(std::floor(spec.center.y + 0.5)) - spec.height / 2;
  CropResult r{GrayImage(spec.width, spec.height), 0.0};
  std::size_t outside = 0;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (image.in_bounds(left + x, top + y)) {
        r.image.at(x, y) = image.at(left + x, top + y);
      } else {
        ++outside;
      }
    }
  }
  const auto total = static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height);
  if (outside == total) throw GeometryError("crop: window lies entirely outside the image");
  r.clipped_fraction = static_cast<double>(outside) / static_cast<double>(total);
  return r;
}

// Crop sizes as multiples of the inter-eye distance.
struct CropConfig {
  double periocular = 0.9;
  double nose = 0.7;
  double eyebrow_width = 0.9;
  double eyebrow_height = 0.5;
};

struct TraitCropSpecs {
  CropSpec periocular;
  CropSpec nose;
  CropSpec eyebrow;
};

inline TraitCropSpecs trait_crop_specs(const FaceKeypoints& kp, const CropConfig& cfg) {
  const double ied = distance(kp.left_eye, kp.right_eye);
  if (!(ied > 0.0)) throw GeometryError("trait crops: eye keypoints coincide");
  auto side = [&](double scale) {
    if (!(scale > 0.0)) throw ConfigError("crop scale factors must be positive");
    return std::max(1, static_cast<int>(std::lround(scale * ied)));
  };
  return {{kp.left_eye, side(cfg.periocular), side(cfg.periocular)},
          {kp.nose_center, side(cfg.nose), side(cfg.nose)},
          {kp.left_eyebrow_center, side(cfg.eyebrow_width), side(cfg.eyebrow_height)}};
}

struct TraitImages {
  RotatedFace face;
  CropResult periocular;
  CropResult nose;
  CropResult eyebrow;
};

inline TraitImages extract_trait_images(const GrayImage& image, const FaceKeypoints& kp, const CropConfig& cfg) {
  TraitImages out;
  out.face = normalize_rotation(image, kp);
  const auto specs = trait_crop_specs(out.face.keypoints, cfg);
  out.periocular = crop(out.face.image, specs.periocular);
  out.nose = crop(out.face.image, specs.nose);
  out.eyebrow = crop(out.face.image, specs.eyebrow);
  return out;
}

// ---------------------------------------------------------------------------
// Iris rubber sheet

struct IrisCircles {
  Point2 pupil_center;
  double pupil_radius = 0.0;
  Point2 iris_center;
  double iris_radius = 0.0;
  std::optional<GrayImage> occlusion_mask;  // 1 = valid iris pixel
};

struct NormalizedIris {
  GrayImage rect;  // rows: radial fraction 0..1 (pupil -> iris); columns: angle
  GrayImage mask;  // 1 = valid sample
};

inline constexpr int kDefaultIrisRows = 64;
inline constexpr int kDefaultIrisCols = 512;

// Cell (r, c) samples the point at fraction rho = r/(rows-1) along the segment
// from the pupil boundary to the iris boundary at angle
// theta = angle_offset + 2*pi*c/cols. The mask is 1 iff that point is in
// bounds and the occlusion mask (nearest pixel) marks it valid.
inline NormalizedIris rubber_sheet(const GrayImage& image, const IrisCircles& circles, int rows = kDefaultIrisRows,
                                   int cols = kDefaultIrisCols, double angle_offset = 0.0) {
  if (rows < 2 || cols < 8) throw ShapeError("rubber_sheet: output must be at least 2 x 8");
  for (double v : {circles.pupil_center.x, circles.pupil_center.y, circles.iris_center.x, circles.iris_center.y,
                   circles.pupil_radius, circles.iris_radius}) {
    if (!std::isfinite(v)) throw GeometryError("rubber_sheet: non-finite circle parameters");
  }
  if (!(circles.pupil_radius > 0.0)) throw GeometryError("rubber_sheet: pupil radius must be positive");
  if (!(circles.pupil_radius < circles.iris_radius)) {
    throw GeometryError("rubber_sheet: pupil radius must be smaller than iris radius");
  }
  const GrayImage* occ = circles.occlusion_mask ? &*circles.occlusion_mask : nullptr;
  if (occ && (occ->width() != image.width() || occ->height() != image.height())) {
    throw ShapeError("rubber_sheet: occlusion mask size differs from the image");
  }

  NormalizedIris out{GrayImage(cols, rows), GrayImage(cols, rows)};
  for (int c = 0; c < cols; ++c) {
    const double theta = angle_offset + 2.0 * std::numbers::pi * c / cols;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    const Point2 inner{circles.pupil_center.x + circles.pupil_radius * ct, circles.pupil_center.y + circles.pupil_radius * st};
    const Point2 outer{circles.iris_center.x + circles.iris_radius * ct, circles.iris_center.y + circles.iris_radius * st};
    for (int r = 0; r < rows; ++r) {
      const double rho = static_cast<double>(r) / (rows - 1);
      const double x = (1.0 - rho) * inner.x + rho * outer.x;
      const double y = (1.0 - rho) * inner.y + rho * outer.y;
      const auto s = bilinear(image, x, y);
      bool valid = s.valid;
      if (valid && occ) {
        const int nx = std::clamp(static_cast<int>(std::floor(x + 0.5)), 0, image.width() - 1);
        const int ny = std::clamp(static_cast<int>(std::floor(y + 0.5)), 0, image.height() - 1);
        valid = occ->at(nx, ny) >= 0.5;
      }
      out.rect.at(c, r) = s.value;
      out.mask.at(c, r) = valid ? 1.0 : 0.0;
    }
  }
  return out;
}

struct IrisSubimages {
  std::array<GrayImage, kIrisSubimages> rects;
  std::array<GrayImage, kIrisSubimages> masks;
  std::array<double, kIrisSubimages> mask_ratios{};
};

// Four equal angular strips: strip i covers columns [i*W/4, (i+1)*W/4).
inline IrisSubimages split_subimages(const NormalizedIris& norm) {
  const int w = norm.rect.width();
  const int h = norm.rect.height();
  if (norm.mask.width() != w || norm.mask.height() != h) throw ShapeError("split_subimages: rect and mask differ in size");
  if (w % static_cast<int>(kIrisSubimages) != 0) throw ShapeError("split_subimages: width must be divisible by 4");
  const int sw = w / static_cast<int>(kIrisSubimages);
  IrisSubimages out;
  for (std::size_t i = 0; i < kIrisSubimages; ++i) {
    out.rects[i] = GrayImage(sw, h);
    out.masks[i] = GrayImage(sw, h);
    const int x0 = static_cast<int>(i) * sw;
    std::size_t valid = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < sw; ++x) {
        out.rects[i].at(x, y) = norm.rect.at(x0 + x, y);
        const double m = norm.mask.at(x0 + x, y);
        out.masks[i].at(x, y) = m;
        if (m >= 0.5) ++valid;
      }
    }
    out.mask_ratios[i] = static_cast<double>(valid) / (static_cast<double>(sw) * h);
  }
  return out;
}

}  // namespace fusebench
