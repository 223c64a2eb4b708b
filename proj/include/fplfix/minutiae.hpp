#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fplfix/core.hpp"
#include "fplfix/preprocess.hpp"

namespace fplfix {

inline constexpr int kMinutiaeChannels = 6;

struct MinutiaeMapParams {
  int map_size = 64;     // map resolution (square)
  int frame_size = 299;  // coordinate frame the minutiae live in
  double sigma_s = 3.0;  // spatial spread, in map pixels
  double sigma_a = 2 * kPi / 12;  // angular spread, radians
};

// 6-channel spatial hot-spot encoding of a minutiae set. Channel c collects
// the minutiae whose direction is near 2*pi*c/6.
struct MinutiaeMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // [channel][y][x]

  double at(int c, int x, int y) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int x, int y) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

namespace detail {

inline double wrap_angle(double a) {
  a = std::fmod(a, 2 * kPi);
  if (a > kPi) a -= 2 * kPi;
  if (a <= -kPi) a += 2 * kPi;
  return a;
}

}  // namespace detail

// Superposition of per-minutia kernels: an isotropic spatial Gaussian times an
// angular Gaussian over the 6 direction bins, with the angular weights
// normalized to sum to one so a minutia contributes the same total mass to the
// channel stack regardless of its direction.
inline MinutiaeMap build_minutiae_map(const std::vector<Minutia>& minutiae,
                                      const MinutiaeMapParams& params = {}) {
  if (params.map_size < 1 || params.frame_size < 1) {
    throw InvalidArgument("minutiae map: bad resolution");
  }
  MinutiaeMap map;
  map.width = params.map_size;
  map.height = params.map_size;
  map.values.assign(static_cast<std::size_t>(kMinutiaeChannels) * params.map_size *
                        params.map_size,
                    0.0);
  const double scale = static_cast<double>(params.map_size) / params.frame_size;
  const double inv2ss = 1.0 / (2 * params.sigma_s * params.sigma_s);
  const double inv2sa = 1.0 / (2 * params.sigma_a * params.sigma_a);

  for (const auto& m : minutiae) {
    if (m.x < 0 || m.y < 0 || m.x >= params.frame_size || m.y >= params.frame_size) {
      throw ContractViolation("minutia outside frame");
    }
    const double mx = m.x * scale;
    const double my = m.y * scale;
    double ang[kMinutiaeChannels];
    double ang_sum = 0;
    for (int c = 0; c < kMinutiaeChannels; ++c) {
      const double d = detail::wrap_angle(m.theta - 2 * kPi * c / kMinutiaeChannels);
      ang[c] = std::exp(-d * d * inv2sa);
      ang_sum += ang[c];
    }
    for (int c = 0; c < kMinutiaeChannels; ++c) ang[c] /= ang_sum;

    for (int y = 0; y < map.height; ++y) {
      const double dy = y - my;
      for (int x = 0; x < map.width; ++x) {
        const double dx = x - mx;
        const double spatial = std::exp(-(dx * dx + dy * dy) * inv2ss);
        for (int c = 0; c < kMinutiaeChannels; ++c) {
          map.at(c, x, y) += spatial * ang[c];
        }
      }
    }
  }
  return map;
}

// Mean-pool each channel over a g x g grid, flatten channel-major, normalize.
inline std::vector<float> extract_minutiae_embedding(const MinutiaeMap& map, int grid = 8) {
  if (grid < 1) throw InvalidArgument("grid must be >= 1");
  if (map.width < grid || map.height < grid) {
    throw InvalidArgument("map smaller than pooling grid");
  }
  std::vector<double> pooled(static_cast<std::size_t>(kMinutiaeChannels) * grid * grid, 0.0);
  std::vector<double> area(static_cast<std::size_t>(grid) * grid, 0.0);
  std::vector<int> cell_x(map.width), cell_y(map.height);
  for (int x = 0; x < map.width; ++x) cell_x[x] = std::min(x * grid / map.width, grid - 1);
  for (int y = 0; y < map.height; ++y) cell_y[y] = std::min(y * grid / map.height, grid - 1);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) area[cell_y[y] * grid + cell_x[x]] += 1.0;
  }
  for (int c = 0; c < kMinutiaeChannels; ++c) {
    for (int y = 0; y < map.height; ++y) {
      for (int x = 0; x < map.width; ++x) {
        pooled[(static_cast<std::size_t>(c) * grid + cell_y[y]) * grid + cell_x[x]] +=
            map.at(c, x, y);
      }
    }
  }
  double norm2 = 0;
  for (int c = 0; c < kMinutiaeChannels; ++c) {
    for (int cell = 0; cell < grid * grid; ++cell) {
      pooled[static_cast<std::size_t>(c) * grid * grid + cell] /= area[cell];
      const double v = pooled[static_cast<std::size_t>(c) * grid * grid + cell];
      norm2 += v * v;
    }
  }
  if (norm2 < 1e-24) throw DegenerateInput("zero minutiae map");
  const double inv_norm = 1.0 / std::sqrt(norm2);
  std::vector<float> out(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    out[i] = static_cast<float>(pooled[i] * inv_norm);
  }
  return out;
}

namespace detail {

// Zhang-Suen thinning on a binary ridge mask (1 = ridge).
inline void thin_skeleton(std::vector<std::uint8_t>& mask, int w, int h) {
  auto at = [&](int x, int y) -> std::uint8_t& {
    return mask[static_cast<std::size_t>(y) * w + x];
  };
  bool changed = true;
  std::vector<std::size_t> kill;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      kill.clear();
      for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
          if (!at(x, y)) continue;
          const int p2 = at(x, y - 1), p3 = at(x + 1, y - 1), p4 = at(x + 1, y);
          const int p5 = at(x + 1, y + 1), p6 = at(x, y + 1), p7 = at(x - 1, y + 1);
          const int p8 = at(x - 1, y), p9 = at(x - 1, y - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;
          const int a = (p2 == 0 && p3 == 1) + (p3 == 0 && p4 == 1) + (p4 == 0 && p5 == 1) +
                        (p5 == 0 && p6 == 1) + (p6 == 0 && p7 == 1) + (p7 == 0 && p8 == 1) +
                        (p8 == 0 && p9 == 1) + (p9 == 0 && p2 == 1);
          if (a != 1) continue;
          if (pass == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          kill.push_back(static_cast<std::size_t>(y) * w + x);
        }
      }
      for (std::size_t i : kill) mask[i] = 0;
      if (!kill.empty()) changed = true;
    }
  }
}

inline int crossing_number(const std::vector<std::uint8_t>& mask, int w, int x, int y) {
  // Cyclic 8-neighborhood, clockwise from east.
  static constexpr int dx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  static constexpr int dy[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  int cn = 0;
  for (int i = 0; i < 8; ++i) {
    const int a = mask[static_cast<std::size_t>(y + dy[i]) * w + (x + dx[i])];
    const int b = mask[static_cast<std::size_t>(y + dy[(i + 1) % 8]) * w + (x + dx[(i + 1) % 8])];
    cn += std::abs(a - b);
  }
  return cn / 2;
}

inline int neighbor_count(const std::vector<std::uint8_t>& mask, int w, int x, int y) {
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      n += mask[static_cast<std::size_t>(y + dy) * w + (x + dx)];
    }
  }
  return n;
}

// Removes skeleton branches that run from an endpoint into a junction within
// max_len steps. Genuine ridge endings survive because they do not reach a
// junction that quickly.
inline void prune_spurs(std::vector<std::uint8_t>& mask, int w, int h, int max_len) {
  bool removed = true;
  while (removed) {
    removed = false;
    for (int y = 1; y < h - 1; ++y) {
      for (int x = 1; x < w - 1; ++x) {
        if (!mask[static_cast<std::size_t>(y) * w + x]) continue;
        if (neighbor_count(mask, w, x, y) != 1) continue;
        // Trace from the endpoint.
        std::vector<std::size_t> path;
        int cx = x, cy = y, px = -1, py = -1;
        bool is_spur = false;
        for (int step = 0; step < max_len; ++step) {
          path.push_back(static_cast<std::size_t>(cy) * w + cx);
          int nx = -1, ny = -1, n_next = 0;
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (dx == 0 && dy == 0) continue;
              const int tx = cx + dx, ty = cy + dy;
              if (tx == px && ty == py) continue;
              if (tx < 1 || ty < 1 || tx >= w - 1 || ty >= h - 1) continue;
              if (mask[static_cast<std::size_t>(ty) * w + tx]) {
                nx = tx;
                ny = ty;
                ++n_next;
              }
            }
          }
          if (n_next == 0) break;  // isolated stub: not attached to a junction
          if (n_next > 1 || neighbor_count(mask, w, nx, ny) > 2) {
            is_spur = true;  // reached a junction
            break;
          }
          px = cx;
          py = cy;
          cx = nx;
          cy = ny;
        }
        if (is_spur) {
          for (std::size_t i : path) mask[i] = 0;
          removed = true;
        }
      }
    }
  }
}

// Direction of an ending: from a short skeleton trace toward the endpoint.
inline double ending_direction(const std::vector<std::uint8_t>& mask, int w, int h, int x0,
                               int y0) {
  int cx = x0, cy = y0, px = -1, py = -1;
  for (int step = 0; step < 6; ++step) {
    int nx = -1, ny = -1;
    for (int dy = -1; dy <= 1 && nx < 0; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int tx = cx + dx, ty = cy + dy;
        if (tx == px && ty == py) continue;
        if (tx < 0 || ty < 0 || tx >= w || ty >= h) continue;
        if (mask[static_cast<std::size_t>(ty) * w + tx]) {
          nx = tx;
          ny = ty;
          break;
        }
      }
    }
    if (nx < 0) break;
    px = cx;
    py = cy;
    cx = nx;
    cy = ny;
  }
  double theta = std::atan2(static_cast<double>(y0 - cy), static_cast<double>(x0 - cx));
  if (theta < 0) theta += 2 * kPi;
  return theta;
}

}  // namespace detail

// Classical skeleton + crossing-number detector. Expects an enhanced,
// binarized image (ridges dark). Minutiae within 8 px of the border are
// discarded; near-duplicate detections are merged.
inline std::vector<Minutia> detect_minutiae(const GrayImage& img) {
  const int w = img.width, h = img.height;
  std::vector<std::uint8_t> mask(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) mask[i] = img.data[i] < 128 ? 1 : 0;

  detail::thin_skeleton(mask, w, h);
  detail::prune_spurs(mask, w, h, 8);

  constexpr int kBorder = 8;
  constexpr double kMergeDist = 6.0;
  std::vector<Minutia> out;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      if (!mask[static_cast<std::size_t>(y) * w + x]) continue;
      const int cn = detail::crossing_number(mask, w, x, y);
      if (cn != 1 && cn != 3) continue;
      if (x < kBorder || y < kBorder || x >= w - kBorder || y >= h - kBorder) continue;
      Minutia m;
      m.x = x;
      m.y = y;
      if (cn == 1) {
        m.theta = detail::ending_direction(mask, w, h, x, y);
      } else {
        // Bifurcation: local ridge orientation from gradient covariance.
        double gxx = 0, gyy = 0, gxy = 0;
        for (int dy = -8; dy <= 8; ++dy) {
          for (int dx = -8; dx <= 8; ++dx) {
            const int tx = std::clamp(x + dx, 1, w - 2);
            const int ty = std::clamp(y + dy, 1, h - 2);
            const double gx = (static_cast<double>(img.at(tx + 1, ty)) - img.at(tx - 1, ty)) / 2;
            const double gy = (static_cast<double>(img.at(tx, ty + 1)) - img.at(tx, ty - 1)) / 2;
            gxx += gx * gx;
            gyy += gy * gy;
            gxy += gx * gy;
          }
        }
        double theta = 0.5 * std::atan2(2 * gxy, gxx - gyy) + kPi / 2;
        theta = std::fmod(theta, kPi);
        if (theta < 0) theta += kPi;
        m.theta = theta;
      }
      bool merged = false;
      for (const auto& prev : out) {
        if (std::hypot(prev.x - m.x, prev.y - m.y) < kMergeDist) {
          merged = true;
          break;
        }
      }
      if (!merged) out.push_back(m);
    }
  }
  return out;
}

}  // namespace fplfix
