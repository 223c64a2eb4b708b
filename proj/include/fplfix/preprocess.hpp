#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fplfix/core.hpp"
#include "fplfix/rng.hpp"

namespace fplfix {

inline constexpr int kNormalizedSize = 299;
inline constexpr double kPi = 3.141592653589793;

struct EnhancementParams {
  int block_size = 16;
  double gabor_sigma = 4.0;
  double min_frequency = 1.0 / 25.0;
  double max_frequency = 1.0 / 3.0;
  bool binarize = false;
};

struct AugmentationParams {
  double max_rotation_deg = 0;
  double max_shift_px = 0;
  double brightness_delta = 0;
  double contrast_delta = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::uint8_t clamp_u8(double v) {
  const long r = std::lround(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

// Bilinear sample with out-of-frame taps filled by `fill` (255 = white valley
// background, matching blank scanner area).
inline double bilinear(const GrayImage& img, double x, double y, double fill) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  auto tap = [&](int xi, int yi) -> double {
    if (xi < 0 || yi < 0 || xi >= img.width || yi >= img.height) return fill;
    return img.at(xi, yi);
  };
  const double top = tap(x0, y0) * (1 - fx) + tap(x0 + 1, y0) * fx;
  const double bot = tap(x0, y0 + 1) * (1 - fx) + tap(x0 + 1, y0 + 1) * fx;
  return top * (1 - fy) + bot * fy;
}

// Clamped variant used by resampling of cropped regions.
inline double bilinear_clamped(const GrayImage& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = img.at(x0, y0) * (1 - fx) + img.at(x1, y0) * fx;
  const double bot = img.at(x0, y1) * (1 - fx) + img.at(x1, y1) * fx;
  return top * (1 - fy) + bot * fy;
}

}  // namespace detail

// Center square crop (side = min(width, height)) followed by bilinear resize
// to 299x299. Identity on inputs that are already 299x299.
inline GrayImage crop_resize(const GrayImage& img, int target = kNormalizedSize) {
  if (img.width <= 0 || img.height <= 0 || img.data.empty()) {
    throw InvalidArgument("crop_resize: degenerate image");
  }
  const int side = std::min(img.width, img.height);
  const int x0 = (img.width - side) / 2;
  const int y0 = (img.height - side) / 2;
  GrayImage out(target, target);
  const double scale = static_cast<double>(side) / target;
  for (int dy = 0; dy < target; ++dy) {
    const double sy = y0 + (dy + 0.5) * scale - 0.5;
    for (int dx = 0; dx < target; ++dx) {
      const double sx = x0 + (dx + 0.5) * scale - 0.5;
      out.at(dx, dy) = detail::clamp_u8(detail::bilinear_clamped(img, sx, sy));
    }
  }
  return out;
}

// Per-block dominant ridge orientation in [0, pi), from gradient covariance.
// Blocks without directional energy keep angle 0 and are flagged incoherent.
struct OrientationField {
  int block_size = 16;
  int cols = 0;
  int rows = 0;
  std::vector<double> angle;      // [0, pi), row-major over blocks
  std::vector<double> coherence;  // 0 (isotropic) .. 1 (single orientation)
  std::vector<std::uint8_t> coherent;

  double angle_at(int bx, int by) const { return angle[static_cast<std::size_t>(by) * cols + bx]; }
  bool coherent_at(int bx, int by) const {
    return coherent[static_cast<std::size_t>(by) * cols + bx] != 0;
  }
  int block_of_x(int x) const { return std::min(x / block_size, cols - 1); }
  int block_of_y(int y) const { return std::min(y / block_size, rows - 1); }
};

inline OrientationField estimate_orientation_field(const GrayImage& img, int block_size = 16) {
  if (block_size < 8) throw InvalidArgument("block_size must be >= 8");
  if (img.width < block_size || img.height < block_size) {
    throw InvalidArgument("image smaller than one block");
  }
  OrientationField field;
  field.block_size = block_size;
  field.cols = img.width / block_size;
  field.rows = img.height / block_size;
  const std::size_t n_blocks = static_cast<std::size_t>(field.cols) * field.rows;
  std::vector<double> gxx(n_blocks, 0), gyy(n_blocks, 0), gxy(n_blocks, 0);

  for (int y = 0; y < img.height; ++y) {
    const int by = field.block_of_y(y);
    for (int x = 0; x < img.width; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, img.width - 1);
      const int ym = std::max(y - 1, 0), yp = std::min(y + 1, img.height - 1);
      const double gx = (static_cast<double>(img.at(xp, y)) - img.at(xm, y)) / (xp - xm);
      const double gy = (static_cast<double>(img.at(x, yp)) - img.at(x, ym)) / (yp - ym);
      const std::size_t b = static_cast<std::size_t>(by) * field.cols + field.block_of_x(x);
      gxx[b] += gx * gx;
      gyy[b] += gy * gy;
      gxy[b] += gx * gy;
    }
  }

  field.angle.resize(n_blocks);
  field.coherence.resize(n_blocks);
  field.coherent.resize(n_blocks);
  constexpr double kCoherenceFloor = 0.2;
  constexpr double kEnergyFloor = 1e-9;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const double energy = gxx[b] + gyy[b];
    const double anis = std::hypot(gxx[b] - gyy[b], 2 * gxy[b]);
    const double coh = energy > kEnergyFloor ? anis / energy : 0.0;
    field.coherence[b] = coh;
    if (energy <= kEnergyFloor || coh < kCoherenceFloor) {
      field.angle[b] = 0;
      field.coherent[b] = 0;
      continue;
    }
    double theta = 0.5 * std::atan2(2 * gxy[b], gxx[b] - gyy[b]) + kPi / 2;
    theta = std::fmod(theta, kPi);
    if (theta < 0) theta += kPi;
    field.angle[b] = theta;
    field.coherent[b] = 1;
  }
  return field;
}

namespace detail {

// Ridge frequency of one block: mean x-signature across ridges, then the
// zero-crossing rate of the mean-removed signature. Returns 0 when no
// oscillation is found.
inline double block_ridge_frequency(const GrayImage& img, double cx, double cy,
                                    double ridge_angle, int window_across = 40,
                                    int window_along = 12) {
  const double wave = ridge_angle + kPi / 2;  // across ridges
  const double ux = std::cos(wave), uy = std::sin(wave);
  const double vx = std::cos(ridge_angle), vy = std::sin(ridge_angle);
  std::vector<double> signature(window_across, 0.0);
  for (int k = 0; k < window_across; ++k) {
    const double s = k - (window_across - 1) / 2.0;
    double sum = 0;
    for (int j = 0; j < window_along; ++j) {
      const double t = j - (window_along - 1) / 2.0;
      sum += bilinear_clamped(img, cx + s * ux + t * vx, cy + s * uy + t * vy);
    }
    signature[k] = sum / window_along;
  }
  double mean = 0;
  for (double v : signature) mean += v;
  mean /= signature.size();
  int crossings = 0;
  int prev_sign = 0;
  for (double v : signature) {
    const double d = v - mean;
    if (std::abs(d) < 1e-9) continue;
    const int sign = d > 0 ? 1 : -1;
    if (prev_sign != 0 && sign != prev_sign) ++crossings;
    prev_sign = sign;
  }
  if (crossings < 2) return 0;
  // Two crossings per cycle over the sampled span.
  return crossings / (2.0 * (window_across - 1));
}

}  // namespace detail

// Block-wise oriented even Gabor filtering. Blocks whose frequency estimate
// falls outside [min_frequency, max_frequency], and incoherent blocks, pass
// through unchanged. Optional binarization by per-block mean threshold.
inline GrayImage enhance(const GrayImage& img, const EnhancementParams& params = {}) {
  if (params.block_size < 8) throw InvalidArgument("block_size must be >= 8");
  if (!(params.min_frequency < params.max_frequency)) {
    throw InvalidArgument("empty frequency window");
  }
  const OrientationField field = estimate_orientation_field(img, params.block_size);
  const int bs = params.block_size;
  const int radius = static_cast<int>(std::ceil(2.5 * params.gabor_sigma));
  const int ksize = 2 * radius + 1;

  // Per-block kernels; empty kernel marks a pass-through block.
  const std::size_t n_blocks = field.angle.size();
  std::vector<std::vector<float>> kernels(n_blocks);
  for (int by = 0; by < field.rows; ++by) {
    for (int bx = 0; bx < field.cols; ++bx) {
      const std::size_t b = static_cast<std::size_t>(by) * field.cols + bx;
      if (!field.coherent[b]) continue;
      const double cx = std::min((bx + 0.5) * bs, img.width - 1.0);
      const double cy = std::min((by + 0.5) * bs, img.height - 1.0);
      const double freq = detail::block_ridge_frequency(img, cx, cy, field.angle[b]);
      if (freq < params.min_frequency || freq > params.max_frequency) continue;
      std::vector<float>& k = kernels[b];
      k.resize(static_cast<std::size_t>(ksize) * ksize);
      const double wave = field.angle[b] + kPi / 2;
      const double wx = std::cos(wave) * 2 * kPi * freq;
      const double wy = std::sin(wave) * 2 * kPi * freq;
      const double inv2s2 = 1.0 / (2 * params.gabor_sigma * params.gabor_sigma);
      double dc = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const double g = std::exp(-(dx * dx + dy * dy) * inv2s2) * std::cos(wx * dx + wy * dy);
          k[static_cast<std::size_t>(dy + radius) * ksize + (dx + radius)] = static_cast<float>(g);
          dc += g;
        }
      }
      const float correction = static_cast<float>(dc / (static_cast<double>(ksize) * ksize));
      for (auto& v : k) v -= correction;  // zero response to constant input
    }
  }

  GrayImage out = img;
  std::vector<double> response(img.data.size(), 0.0);
  std::vector<std::uint8_t> filtered(n_blocks, 0);
  for (int by = 0; by < field.rows; ++by) {
    const int y_lo = by * bs;
    const int y_hi = (by == field.rows - 1) ? img.height : (by + 1) * bs;
    for (int bx = 0; bx < field.cols; ++bx) {
      const std::size_t b = static_cast<std::size_t>(by) * field.cols + bx;
      if (kernels[b].empty()) continue;
      filtered[b] = 1;
      const std::vector<float>& k = kernels[b];
      const int x_lo = bx * bs;
      const int x_hi = (bx == field.cols - 1) ? img.width : (bx + 1) * bs;
      for (int y = y_lo; y < y_hi; ++y) {
        for (int x = x_lo; x < x_hi; ++x) {
          double acc = 0;
          for (int dy = -radius; dy <= radius; ++dy) {
            const int yy = std::clamp(y + dy, 0, img.height - 1);
            const float* krow = &k[static_cast<std::size_t>(dy + radius) * ksize];
            for (int dx = -radius; dx <= radius; ++dx) {
              const int xx = std::clamp(x + dx, 0, img.width - 1);
              acc += krow[dx + radius] * img.at(xx, yy);
            }
          }
          response[static_cast<std::size_t>(y) * img.width + x] = acc;
        }
      }
      // Contrast-normalize the block response around mid-gray.
      double mean = 0, count = 0;
      for (int y = y_lo; y < y_hi; ++y) {
        for (int x = x_lo; x < x_hi; ++x) {
          mean += response[static_cast<std::size_t>(y) * img.width + x];
          ++count;
        }
      }
      mean /= count;
      double var = 0;
      for (int y = y_lo; y < y_hi; ++y) {
        for (int x = x_lo; x < x_hi; ++x) {
          const double d = response[static_cast<std::size_t>(y) * img.width + x] - mean;
          var += d * d;
        }
      }
      const double sd = std::sqrt(var / count);
      if (sd < 1e-9) {
        filtered[b] = 0;  // flat response, keep original pixels
        continue;
      }
      for (int y = y_lo; y < y_hi; ++y) {
        for (int x = x_lo; x < x_hi; ++x) {
          const double r = response[static_cast<std::size_t>(y) * img.width + x];
          out.at(x, y) = detail::clamp_u8(128 + 64 * (r - mean) / sd);
        }
      }
    }
  }

  if (params.binarize) {
    for (int by = 0; by < field.rows; ++by) {
      const int y_lo = by * bs;
      const int y_hi = (by == field.rows - 1) ? img.height : (by + 1) * bs;
      for (int bx = 0; bx < field.cols; ++bx) {
        const int x_lo = bx * bs;
        const int x_hi = (bx == field.cols - 1) ? img.width : (bx + 1) * bs;
        double mean = 0, count = 0;
        for (int y = y_lo; y < y_hi; ++y) {
          for (int x = x_lo; x < x_hi; ++x) {
            mean += out.at(x, y);
            ++count;
          }
        }
        mean /= count;
        for (int y = y_lo; y < y_hi; ++y) {
          for (int x = x_lo; x < x_hi; ++x) {
            out.at(x, y) = out.at(x, y) < mean ? 0 : 255;
          }
        }
      }
    }
  }
  return out;
}

// Seeded random rotation / integer shift / brightness+contrast jitter.
// Draw order: rotation, dx, dy, brightness, contrast. All maxima zero is the
// bit-exact identity.
inline GrayImage augment(const GrayImage& img, const AugmentationParams& params) {
  if (params.max_rotation_deg < 0 || params.max_shift_px < 0 ||
      params.brightness_delta < 0 || params.brightness_delta >= 1 ||
      params.contrast_delta < 0 || params.contrast_delta >= 1) {
    throw InvalidArgument("augment: parameter out of range");
  }
  Rng rng(params.seed);
  const double rot_deg = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg);
  const double dx = rng.uniform(-params.max_shift_px, params.max_shift_px);
  const double dy = rng.uniform(-params.max_shift_px, params.max_shift_px);
  const double brightness = rng.uniform(-params.brightness_delta, params.brightness_delta);
  const double contrast = rng.uniform(-params.contrast_delta, params.contrast_delta);

  const double phi = rot_deg * kPi / 180.0;
  const long di = std::lround(dx);
  const long dj = std::lround(dy);
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  const double cphi = std::cos(phi), sphi = std::sin(phi);

  GrayImage out(img.width, img.height);
  const bool pure_shift = (phi == 0.0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double v;
      if (pure_shift) {
        const long sx = x - di;
        const long sy = y - dj;
        v = (sx < 0 || sy < 0 || sx >= img.width || sy >= img.height)
                ? 255.0
                : img.at(static_cast<int>(sx), static_cast<int>(sy));
      } else {
        const double qx = x - di - cx;
        const double qy = y - dj - cy;
        const double sx = cphi * qx + sphi * qy + cx;
        const double sy = -sphi * qx + cphi * qy + cy;
        v = detail::bilinear(img, sx, sy, 255.0);
      }
      out.at(x, y) = detail::clamp_u8((v - 128.0) * (1.0 + contrast) + 128.0 + brightness * 255.0);
    }
  }
  return out;
}

}  // namespace fplfix
