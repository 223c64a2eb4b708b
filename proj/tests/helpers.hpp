#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fplfix/core.hpp"
#include "fplfix/dataset.hpp"
#include "fplfix/preprocess.hpp"

namespace testutil {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fplfix_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Plain sinusoidal ridge pattern: ridges (dark) perpendicular to `angle_deg`'s
// wave direction; ridge orientation equals angle_deg.
inline fplfix::GrayImage make_sinusoid(int size, double angle_deg, double freq,
                                       double amplitude = 100, double noise_sigma = 0,
                                       unsigned noise_seed = 1) {
  fplfix::GrayImage img(size, size);
  const double angle = angle_deg * fplfix::kPi / 180.0;
  // Wave vector is perpendicular to the ridge orientation.
  const double wx = std::cos(angle + fplfix::kPi / 2) * 2 * fplfix::kPi * freq;
  const double wy = std::sin(angle + fplfix::kPi / 2) * 2 * fplfix::kPi * freq;
  std::mt19937 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double v = 128.0 - amplitude * std::cos(wx * x + wy * y);
      if (noise_sigma > 0) v += noise(rng);
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

// Zero-mean normalized cross-correlation over a pixel region.
inline double region_correlation(const fplfix::GrayImage& a, const fplfix::GrayImage& b, int x_lo,
                                 int y_lo, int x_hi, int y_hi) {
  double ma = 0, mb = 0, n = 0;
  for (int y = y_lo; y < y_hi; ++y) {
    for (int x = x_lo; x < x_hi; ++x) {
      ma += a.at(x, y);
      mb += b.at(x, y);
      ++n;
    }
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (int y = y_lo; y < y_hi; ++y) {
    for (int x = x_lo; x < x_hi; ++x) {
      const double da = a.at(x, y) - ma;
      const double db = b.at(x, y) - mb;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
  }
  if (saa <= 0 || sbb <= 0) return 0;
  return sab / std::sqrt(saa * sbb);
}

inline double angle_diff_mod_pi(double a, double b) {
  double d = std::fmod(std::abs(a - b), fplfix::kPi);
  return std::min(d, fplfix::kPi - d);
}

inline std::vector<float> random_unit_vector(std::mt19937& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0, 1);
  std::vector<double> v(dim);
  double norm2 = 0;
  do {
    norm2 = 0;
    for (auto& x : v) {
      x = normal(rng);
      norm2 += x * x;
    }
  } while (norm2 < 1e-12);
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

// Brute-force EER oracle: evaluates FMR/FNMR at every distinct score by
// direct counting. Independent of the library's sorted-array implementation.
inline std::pair<double, double> brute_force_eer(const std::vector<double>& mated,
                                                 const std::vector<double>& non_mated) {
  std::vector<double> candidates = mated;
  candidates.insert(candidates.end(), non_mated.begin(), non_mated.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best_gap = 1e300, best_value = 1.0, best_t = 0.0;
  for (double t : candidates) {
    std::size_t fm = 0;
    for (double s : non_mated) {
      if (s >= t) ++fm;
    }
    std::size_t fnm = 0;
    for (double s : mated) {
      if (s < t) ++fnm;
    }
    const double fmr = static_cast<double>(fm) / non_mated.size();
    const double fnmr = static_cast<double>(fnm) / mated.size();
    const double gap = std::abs(fmr - fnmr);
    const double value = 0.5 * (fmr + fnmr);
    if (gap < best_gap || (gap == best_gap && value < best_value)) {
      best_gap = gap;
      best_value = value;
      best_t = t;
    }
  }
  return {best_value, best_t};
}

inline fplfix::ScoreSet make_score_set(const std::vector<double>& mated,
                                       const std::vector<double>& non_mated) {
  fplfix::ScoreSet scores;
  std::uint16_t i = 0;
  for (double s : mated) {
    fplfix::ScoreEntry e;
    e.probe = {0, 0, i, fplfix::Sensor::synthetic};
    e.gallery = {0, 0, static_cast<std::uint16_t>(i + 1000), fplfix::Sensor::synthetic};
    e.score = s;
    scores.mated.push_back(e);
    ++i;
  }
  std::uint16_t j = 0;
  for (double s : non_mated) {
    fplfix::ScoreEntry e;
    e.probe = {1, 0, j, fplfix::Sensor::synthetic};
    e.gallery = {2, 0, j, fplfix::Sensor::synthetic};
    e.score = s;
    scores.non_mated.push_back(e);
    ++j;
  }
  return scores;
}

}  // namespace testutil
