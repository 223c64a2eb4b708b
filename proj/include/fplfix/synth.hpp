#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "fplfix/core.hpp"
#include "fplfix/parallel.hpp"
#include "fplfix/preprocess.hpp"
#include "fplfix/rng.hpp"

namespace fplfix {

// One synthetic finger: a smooth ridge-phase field plus spiral phase
// singularities. Each singularity is exactly one minutia, which gives the
// corpus pixel-level ground truth for free.
struct SynthIdentity {
  SampleKey instance;  // sample field unused
  std::uint64_t seed = 0;
  double base_angle = 0;        // ridge direction of the linear component
  double ridge_frequency = 0;   // cycles/pixel, in [1/12, 1/6]
  double radial_mix = 0;        // 0 = parallel ridges, 1 = concentric
  double core_x = 0, core_y = 0;
  double warp_amp[2] = {0, 0};
  double warp_freq_x[2] = {0, 0};
  double warp_freq_y[2] = {0, 0};
  double warp_phase[2] = {0, 0};
  std::vector<Minutia> minutiae_truth;  // in the identity's base frame
  std::vector<double> spiral_sign;
};

// Defaults mimic real capture conditions: identities share most of their
// global ridge structure (near-vertical flow, a narrow frequency band) and
// differ mainly in minutiae layout and field warps, while samples of one
// identity vary by a sizeable capture misalignment.
struct SynthParams {
  int image_size = kNormalizedSize;
  double max_rotation_deg = 15.0;  // per-sample jitter
  double max_shift_px = 12.0;
  double contrast_delta = 0.10;
  double noise_sigma = 8.0;
  double ridge_amplitude = 85.0;
  double min_ridge_frequency = 1.0 / 9.5;
  double max_ridge_frequency = 1.0 / 8.5;
  double min_base_angle = 80.0 * kPi / 180.0;  // identity ridge direction
  double max_base_angle = 100.0 * kPi / 180.0;
  double min_radial_mix = 0.45;
  double max_radial_mix = 0.65;
  int min_minutiae = 20;
  int max_minutiae = 36;
  double minutiae_min_dist = 18.0;
  double minutiae_margin = 30.0;
};

struct SynthCorpus {
  std::vector<GrayImage> images;            // manifest order
  std::vector<SampleRecord> manifest;       // image_path left empty until saved
  std::map<SampleKey, std::vector<Minutia>> minutiae_truth;  // per sample
};

namespace detail {

// Smooth base phase: a blend of a slanted plane wave and a concentric pattern
// around the core, with two low-frequency sinusoidal warps on top.
inline double ridge_coordinate(const SynthIdentity& id, double x, double y) {
  const double rx = x - id.core_x;
  const double ry = y - id.core_y;
  const double linear = rx * std::cos(id.base_angle) + ry * std::sin(id.base_angle);
  const double radial = std::sqrt(rx * rx + ry * ry + 25.0);
  double u = (1.0 - id.radial_mix) * linear + id.radial_mix * radial;
  for (int k = 0; k < 2; ++k) {
    u += id.warp_amp[k] *
         std::sin(2 * kPi * (x * id.warp_freq_x[k] + y * id.warp_freq_y[k]) + id.warp_phase[k]);
  }
  return u;
}

inline double base_phase(const SynthIdentity& id, double x, double y) {
  double psi = 2 * kPi * id.ridge_frequency * ridge_coordinate(id, x, y);
  for (std::size_t m = 0; m < id.minutiae_truth.size(); ++m) {
    psi += id.spiral_sign[m] *
           std::atan2(y - id.minutiae_truth[m].y, x - id.minutiae_truth[m].x);
  }
  return psi;
}

// Ridge direction at a point, excluding the singular contribution of spiral
// `skip` (finite differences of the remaining phase).
inline double ridge_direction(const SynthIdentity& id, double x, double y, std::size_t skip) {
  const double h = 0.5;
  auto phase_wo = [&](double px, double py) {
    double psi = 2 * kPi * id.ridge_frequency * ridge_coordinate(id, px, py);
    for (std::size_t m = 0; m < id.minutiae_truth.size(); ++m) {
      if (m == skip) continue;
      psi += id.spiral_sign[m] * std::atan2(py - id.minutiae_truth[m].y, px - id.minutiae_truth[m].x);
    }
    return psi;
  };
  const double kx = (phase_wo(x + h, y) - phase_wo(x - h, y)) / (2 * h);
  const double ky = (phase_wo(x, y + h) - phase_wo(x, y - h)) / (2 * h);
  double theta = std::atan2(ky, kx) + kPi / 2;  // along ridges
  theta = std::fmod(theta, 2 * kPi);
  if (theta < 0) theta += 2 * kPi;
  return theta;
}

inline SynthIdentity make_identity(SampleKey instance, std::uint64_t seed,
                                   const SynthParams& params) {
  SynthIdentity id;
  id.instance = instance;
  id.seed = seed;
  Rng rng(seed);
  const double size = params.image_size;
  id.base_angle = rng.uniform(params.min_base_angle, params.max_base_angle);
  id.ridge_frequency = rng.uniform(params.min_ridge_frequency, params.max_ridge_frequency);
  id.radial_mix = rng.uniform(params.min_radial_mix, params.max_radial_mix);
  id.core_x = size / 2 + rng.uniform(-30, 30);
  id.core_y = size / 2 + rng.uniform(-30, 30);
  for (int k = 0; k < 2; ++k) {
    id.warp_amp[k] = rng.uniform(1.0, 4.0);
    const double wf = rng.uniform(1.0 / 150.0, 1.0 / 80.0);
    const double wa = rng.uniform(0, 2 * kPi);
    id.warp_freq_x[k] = wf * std::cos(wa);
    id.warp_freq_y[k] = wf * std::sin(wa);
    id.warp_phase[k] = rng.uniform(0, 2 * kPi);
  }

  // Poisson-disk minutiae placement inside the margin.
  const int target = params.min_minutiae +
                     static_cast<int>(rng.uniform_int(params.max_minutiae - params.min_minutiae + 1));
  const double lo = params.minutiae_margin;
  const double hi = size - params.minutiae_margin;
  int attempts = 0;
  while (static_cast<int>(id.minutiae_truth.size()) < target && attempts < 4000) {
    ++attempts;
    const double x = rng.uniform(lo, hi);
    const double y = rng.uniform(lo, hi);
    bool ok = true;
    for (const auto& m : id.minutiae_truth) {
      if (std::hypot(x - m.x, y - m.y) < params.minutiae_min_dist) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    id.minutiae_truth.push_back({x, y, 0.0});
    id.spiral_sign.push_back(rng.uniform() < 0.5 ? 1.0 : -1.0);
  }
  // Ground-truth directions once all spirals are placed.
  for (std::size_t m = 0; m < id.minutiae_truth.size(); ++m) {
    id.minutiae_truth[m].theta =
        ridge_direction(id, id.minutiae_truth[m].x, id.minutiae_truth[m].y, m);
  }
  return id;
}

struct SampleTransform {
  double phi = 0;     // rotation about image center
  double dx = 0, dy = 0;
  double contrast = 0;
};

inline GrayImage render_sample(const SynthIdentity& id, const SynthParams& params,
                               std::uint64_t sample_seed, SampleTransform* out_tf) {
  Rng rng(sample_seed);
  SampleTransform tf;
  tf.phi = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg) * kPi / 180.0;
  tf.dx = rng.uniform(-params.max_shift_px, params.max_shift_px);
  tf.dy = rng.uniform(-params.max_shift_px, params.max_shift_px);
  tf.contrast = rng.uniform(-params.contrast_delta, params.contrast_delta);

  const int size = params.image_size;
  const double c = (size - 1) / 2.0;
  const double cphi = std::cos(tf.phi), sphi = std::sin(tf.phi);
  GrayImage img(size, size);
  const double amp = params.ridge_amplitude * (1.0 + tf.contrast);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      // Base-frame coordinates of this output pixel.
      const double qx = x - tf.dx - c;
      const double qy = y - tf.dy - c;
      const double bx = cphi * qx + sphi * qy + c;
      const double by = -sphi * qx + cphi * qy + c;
      const double ridge = std::cos(base_phase(id, bx, by));
      const double noise = params.noise_sigma > 0 ? rng.normal() * params.noise_sigma : 0.0;
      img.at(x, y) = clamp_u8(128.0 - amp * ridge + noise);
    }
  }
  if (out_tf) *out_tf = tf;
  return img;
}

}  // namespace detail

// Deterministic synthetic corpus: `identities` fingers, `samples_per_identity`
// captures each. Identity k maps to subject k/10, finger k%10. The result is
// a pure function of the arguments; generation parallelizes over samples with
// per-sample derived seeds.
inline SynthCorpus generate_corpus(int identities, int samples_per_identity,
                                   std::uint64_t master_seed, const SynthParams& params = {},
                                   int threads = 0) {
  if (identities < 1) throw InvalidArgument("identities must be >= 1");
  if (samples_per_identity < 2) throw InvalidArgument("samples_per_identity must be >= 2");

  std::vector<SynthIdentity> ids(identities);
  parallel_for(static_cast<std::size_t>(identities), threads, [&](std::size_t k) {
    SampleKey instance;
    instance.subject = static_cast<std::uint32_t>(k / 10);
    instance.finger = static_cast<std::uint16_t>(k % 10);
    instance.sensor = Sensor::synthetic;
    ids[k] = detail::make_identity(instance, derive_seed(master_seed, instance.instance_id()),
                                   params);
  });

  SynthCorpus corpus;
  const std::size_t total = static_cast<std::size_t>(identities) * samples_per_identity;
  corpus.images.resize(total);
  corpus.manifest.resize(total);
  std::vector<std::vector<Minutia>> truth(total);

  parallel_for(total, threads, [&](std::size_t i) {
    const std::size_t k = i / samples_per_identity;
    const int s = static_cast<int>(i % samples_per_identity);
    const SynthIdentity& id = ids[k];
    SampleKey key = id.instance;
    key.sample = static_cast<std::uint16_t>(s);

    detail::SampleTransform tf;
    corpus.images[i] =
        detail::render_sample(id, params, derive_seed(id.seed, static_cast<std::uint64_t>(s) + 1),
                              &tf);
    corpus.manifest[i].key = key;

    // Transform the identity's minutiae into this sample's frame.
    const double c = (params.image_size - 1) / 2.0;
    const double cphi = std::cos(tf.phi), sphi = std::sin(tf.phi);
    for (const auto& m : id.minutiae_truth) {
      const double rx = m.x - c;
      const double ry = m.y - c;
      Minutia t;
      t.x = cphi * rx - sphi * ry + c + tf.dx;
      t.y = sphi * rx + cphi * ry + c + tf.dy;
      t.theta = std::fmod(m.theta + tf.phi, 2 * kPi);
      if (t.theta < 0) t.theta += 2 * kPi;
      if (t.x >= 0 && t.x < params.image_size && t.y >= 0 && t.y < params.image_size) {
        truth[i].push_back(t);
      }
    }
  });

  for (std::size_t i = 0; i < total; ++i) {
    corpus.minutiae_truth[corpus.manifest[i].key] = std::move(truth[i]);
  }
  return corpus;
}

}  // namespace fplfix
