#pragma once

#include <cmath>
#include <vector>

#include "fplfix/core.hpp"
#include "fplfix/preprocess.hpp"

namespace fplfix {

struct TextureBankParams {
  int orientations = 8;                              // equally spaced in [0, pi)
  std::vector<double> frequencies = {1.0 / 6.0, 1.0 / 9.0, 1.0 / 12.0};  // cycles/pixel
  int grid = 8;                                      // g x g pooling cells

  int raw_dim() const {
    return orientations * static_cast<int>(frequencies.size()) * grid * grid;
  }
  void validate() const {
    if (orientations < 1 || grid < 1 || frequencies.empty()) {
      throw InvalidArgument("texture bank: empty configuration");
    }
    for (double f : frequencies) {
      if (!(f > 0 && f < 0.5)) throw InvalidArgument("texture frequencies must lie in (0, 0.5)");
    }
  }
};

// Gabor energy bank with grid pooling. Kernels use an isotropic Gaussian
// envelope (sigma = 0.5 / f), which makes each oriented complex kernel
// separable along the image axes regardless of orientation.
class TextureBank {
 public:
  explicit TextureBank(TextureBankParams params = {}) : params_(std::move(params)) {
    params_.validate();
    for (int o = 0; o < params_.orientations; ++o) {
      const double phi = kPi * o / params_.orientations;
      for (double f : params_.frequencies) {
        Filter flt;
        const double sigma = 0.5 / f;
        flt.radius = static_cast<int>(std::ceil(2.5 * sigma));
        const int n = 2 * flt.radius + 1;
        flt.hx_re.resize(n);
        flt.hx_im.resize(n);
        flt.hy_re.resize(n);
        flt.hy_im.resize(n);
        const double wx = 2 * kPi * f * std::cos(phi);
        const double wy = 2 * kPi * f * std::sin(phi);
        for (int k = -flt.radius; k <= flt.radius; ++k) {
          const double g = std::exp(-(k * k) / (2 * sigma * sigma));
          flt.hx_re[k + flt.radius] = static_cast<float>(g * std::cos(wx * k));
          flt.hx_im[k + flt.radius] = static_cast<float>(g * std::sin(wx * k));
          flt.hy_re[k + flt.radius] = static_cast<float>(g * std::cos(wy * k));
          flt.hy_im[k + flt.radius] = static_cast<float>(g * std::sin(wy * k));
        }
        filters_.push_back(std::move(flt));
      }
    }
  }

  const TextureBankParams& params() const { return params_; }

  // Mean Gabor magnitude per (cell, orientation, frequency), standardized over
  // the vector and L2-normalized. Throws DegenerateInput when the image has no
  // texture energy (e.g. constant input).
  std::vector<float> extract(const GrayImage& img) const {
    if (img.width != kNormalizedSize || img.height != kNormalizedSize) {
      throw ContractViolation("texture extraction expects a 299x299 image");
    }
    const int w = img.width, h = img.height;
    const int g = params_.grid;
    std::vector<float> feature(static_cast<std::size_t>(params_.raw_dim()), 0.0f);

    // Cell index per pixel coordinate (floor split of the image extent).
    std::vector<int> cell_x(w), cell_y(h);
    for (int x = 0; x < w; ++x) cell_x[x] = std::min(x * g / w, g - 1);
    for (int y = 0; y < h; ++y) cell_y[y] = std::min(y * g / h, g - 1);
    std::vector<double> cell_area(static_cast<std::size_t>(g) * g, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) cell_area[cell_y[y] * g + cell_x[x]] += 1.0;
    }

    // Mean-removed copy: responses to a constant image are exactly zero and
    // the descriptor ignores global brightness.
    std::vector<float> centered(img.data.size());
    double img_mean = 0;
    for (std::uint8_t v : img.data) img_mean += v;
    img_mean /= static_cast<double>(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      centered[i] = static_cast<float>(img.data[i] - img_mean);
    }

    std::vector<float> mid_re(static_cast<std::size_t>(w) * h);
    std::vector<float> mid_im(static_cast<std::size_t>(w) * h);
    std::vector<float> row_re(w), row_im(w);

    for (std::size_t fi = 0; fi < filters_.size(); ++fi) {
      const Filter& flt = filters_[fi];
      const int radius = flt.radius;

      // Horizontal complex pass with replicated borders.
      for (int y = 0; y < h; ++y) {
        const float* src = &centered[static_cast<std::size_t>(y) * w];
        float* dst_re = &mid_re[static_cast<std::size_t>(y) * w];
        float* dst_im = &mid_im[static_cast<std::size_t>(y) * w];
        for (int x = 0; x < w; ++x) {
          float acc_re = 0, acc_im = 0;
          for (int k = -radius; k <= radius; ++k) {
            const int xx = std::clamp(x + k, 0, w - 1);
            const float v = src[xx];
            acc_re += flt.hx_re[k + radius] * v;
            acc_im += flt.hx_im[k + radius] * v;
          }
          dst_re[x] = acc_re;
          dst_im[x] = acc_im;
        }
      }

      // Vertical complex pass, accumulating cell magnitude sums.
      std::vector<double> cell_sum(static_cast<std::size_t>(g) * g, 0.0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          row_re[x] = 0;
          row_im[x] = 0;
        }
        for (int k = -radius; k <= radius; ++k) {
          const int yy = std::clamp(y + k, 0, h - 1);
          const float kr = flt.hy_re[k + radius];
          const float ki = flt.hy_im[k + radius];
          const float* mr = &mid_re[static_cast<std::size_t>(yy) * w];
          const float* mi = &mid_im[static_cast<std::size_t>(yy) * w];
          for (int x = 0; x < w; ++x) {
            row_re[x] += kr * mr[x] - ki * mi[x];
            row_im[x] += kr * mi[x] + ki * mr[x];
          }
        }
        const int cy = cell_y[y];
        for (int x = 0; x < w; ++x) {
          cell_sum[cy * g + cell_x[x]] +=
              std::sqrt(static_cast<double>(row_re[x]) * row_re[x] +
                        static_cast<double>(row_im[x]) * row_im[x]);
        }
      }

      const std::size_t base = fi * static_cast<std::size_t>(g) * g;
      for (int c = 0; c < g * g; ++c) {
        feature[base + c] = static_cast<float>(cell_sum[c] / cell_area[c]);
      }
    }

    // Standardize over the vector, then L2-normalize.
    double mean = 0;
    for (float v : feature) mean += v;
    mean /= feature.size();
    double var = 0;
    for (float v : feature) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / feature.size());
    if (sd < 1e-9) throw DegenerateInput("image has no texture energy");
    double norm2 = 0;
    for (float& v : feature) {
      const double z = (v - mean) / sd;
      v = static_cast<float>(z);
      norm2 += z * z;
    }
    const double inv_norm = 1.0 / std::sqrt(norm2);
    for (float& v : feature) v = static_cast<float>(v * inv_norm);
    return feature;
  }

 private:
  struct Filter {
    int radius = 0;
    std::vector<float> hx_re, hx_im, hy_re, hy_im;
  };
  TextureBankParams params_;
  std::vector<Filter> filters_;
};

inline std::vector<float> extract_texture(const GrayImage& img,
                                          const TextureBankParams& params = {}) {
  return TextureBank(params).extract(img);
}

}  // namespace fplfix
