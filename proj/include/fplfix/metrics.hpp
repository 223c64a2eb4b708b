#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "fplfix/compare.hpp"
#include "fplfix/core.hpp"
#include "fplfix/dataset.hpp"
#include "fplfix/parallel.hpp"
#include "fplfix/rng.hpp"

namespace fplfix {

struct DetPoint {
  double fmr = 0;
  double fnmr = 0;
  double threshold = 0;
};

struct FnmrAtFmr {
  double fnmr = 0;
  double threshold = 0;
  // Set when the non-mated list is too small to resolve the target FMR.
  bool resolution_warning = false;
};

struct VerificationReport {
  double eer = 0;
  double eer_threshold = 0;
  std::map<double, FnmrAtFmr> fnmr_at;
  std::vector<DetPoint> det;
};

struct IdentificationReport {
  int fold_count = 0;
  std::vector<double> ranks;                  // mean rank-k rate, k = 1..K
  std::vector<double> rank_std;               // sample std over folds
  std::vector<std::vector<double>> per_fold;  // fold -> K rates
};

namespace detail {

// Sorted score views; all metric queries reduce to binary searches here.
struct SortedScores {
  std::vector<double> mated;      // ascending
  std::vector<double> non_mated;  // ascending

  explicit SortedScores(const ScoreSet& scores) {
    if (scores.mated.empty() || scores.non_mated.empty()) {
      throw InvalidArgument("metrics require non-empty mated and non-mated lists");
    }
    mated.reserve(scores.mated.size());
    for (const auto& e : scores.mated) mated.push_back(e.score);
    non_mated.reserve(scores.non_mated.size());
    for (const auto& e : scores.non_mated) non_mated.push_back(e.score);
    std::sort(mated.begin(), mated.end());
    std::sort(non_mated.begin(), non_mated.end());
  }

  // FMR: fraction of non-mated scores >= t. FNMR: fraction of mated scores < t.
  double fmr(double t) const {
    const auto it = std::lower_bound(non_mated.begin(), non_mated.end(), t);
    return static_cast<double>(non_mated.end() - it) / non_mated.size();
  }
  double fnmr(double t) const {
    const auto it = std::lower_bound(mated.begin(), mated.end(), t);
    return static_cast<double>(it - mated.begin()) / mated.size();
  }
};

inline std::vector<double> distinct_scores(const SortedScores& s) {
  std::vector<double> all;
  all.reserve(s.mated.size() + s.non_mated.size());
  all.insert(all.end(), s.mated.begin(), s.mated.end());
  all.insert(all.end(), s.non_mated.begin(), s.non_mated.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

}  // namespace detail

// Empirical error rates at a decision threshold; the match rule is score >= t.
inline std::pair<double, double> fmr_fnmr(const ScoreSet& scores, double threshold) {
  const detail::SortedScores s(scores);
  return {s.fmr(threshold), s.fnmr(threshold)};
}

// Step-function EER: sweep every distinct score as a candidate threshold and
// return half the sum of FMR and FNMR at the candidate minimizing their gap.
// Ties prefer the smaller error sum, then the lower threshold.
inline std::pair<double, double> eer(const ScoreSet& scores) {
  const detail::SortedScores s(scores);
  const auto candidates = detail::distinct_scores(s);
  double best_gap = std::numeric_limits<double>::infinity();
  double best_value = 1.0;
  double best_threshold = 0.0;
  for (double t : candidates) {
    const double fmr = s.fmr(t);
    const double fnmr = s.fnmr(t);
    const double gap = std::abs(fmr - fnmr);
    const double value = 0.5 * (fmr + fnmr);
    if (gap < best_gap || (gap == best_gap && value < best_value)) {
      best_gap = gap;
      best_value = value;
      best_threshold = t;
    }
  }
  return {best_value, best_threshold};
}

// Lowest threshold whose FMR does not exceed the target; reports the FNMR
// there. The threshold lands just above the first excluded non-mated score.
inline FnmrAtFmr fnmr_at_fmr(const ScoreSet& scores, double target_fmr) {
  if (!(target_fmr > 0 && target_fmr < 1)) {
    throw InvalidArgument("target FMR must lie in (0, 1)");
  }
  const detail::SortedScores s(scores);
  const std::size_t m = s.non_mated.size();
  const auto allowed = static_cast<std::size_t>(target_fmr * static_cast<double>(m));
  FnmrAtFmr result;
  result.resolution_warning = static_cast<double>(m) * target_fmr < 1.0;
  if (allowed >= m) {
    // Every threshold satisfies the target; lowest useful one admits all.
    result.threshold = s.non_mated.front();
  } else {
    // Must exclude the (allowed+1) largest non-mated scores.
    const double cut = s.non_mated[m - allowed - 1];
    result.threshold = std::nextafter(cut, std::numeric_limits<double>::infinity());
  }
  result.fnmr = s.fnmr(result.threshold);
  return result;
}

// DET curve: operating points at n_points log-spaced FMR targets in
// [max(1/|non-mated|, 1e-6), 0.4]. Every emitted point is realized by an
// actual threshold, so FNMR is non-increasing as FMR grows.
inline std::vector<DetPoint> det_curve(const ScoreSet& scores, int n_points) {
  if (n_points < 2) throw InvalidArgument("det_curve needs at least 2 points");
  const detail::SortedScores s(scores);
  const double lo = std::max(1.0 / static_cast<double>(s.non_mated.size()), 1e-6);
  const double hi = 0.4;
  std::vector<DetPoint> det;
  det.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double frac = static_cast<double>(i) / (n_points - 1);
    const double target = lo * std::pow(hi / lo, frac);
    const std::size_t m = s.non_mated.size();
    const auto allowed = static_cast<std::size_t>(target * static_cast<double>(m));
    double threshold;
    if (allowed >= m) {
      threshold = s.non_mated.front();
    } else {
      threshold = std::nextafter(s.non_mated[m - allowed - 1],
                                 std::numeric_limits<double>::infinity());
    }
    det.push_back({s.fmr(threshold), s.fnmr(threshold), threshold});
  }
  return det;
}

inline VerificationReport evaluate_verification(const ScoreSet& scores,
                                                const std::vector<double>& fmr_targets,
                                                int det_points = 100) {
  VerificationReport report;
  const auto [value, threshold] = eer(scores);
  report.eer = value;
  report.eer_threshold = threshold;
  for (double target : fmr_targets) report.fnmr_at[target] = fnmr_at_fmr(scores, target);
  report.det = det_curve(scores, det_points);
  return report;
}

// Closed-set identification with seeded cross-validation folds. Per fold each
// instance enrolls one gallery template (drawn without replacement across
// folds while the instance's samples last); every remaining sample probes the
// gallery. A probe is identified at rank k when its own instance is among the
// k highest-scoring templates.
inline IdentificationReport closed_set_identification(const EmbeddingArchive& archive,
                                                      int folds, int max_rank,
                                                      std::uint64_t seed, int threads = 0) {
  if (folds < 1) throw InvalidArgument("folds must be >= 1");
  std::map<std::uint64_t, std::vector<std::size_t>> by_instance;
  for (std::size_t i = 0; i < archive.records.size(); ++i) {
    by_instance[archive.records[i].key.instance_id()].push_back(i);
  }
  const int n_instances = static_cast<int>(by_instance.size());
  if (max_rank < 1 || max_rank > n_instances) {
    throw InvalidArgument("max_rank must lie in [1, #instances]");
  }
  for (const auto& [id, samples] : by_instance) {
    if (samples.size() < 2) {
      throw InvalidArgument("closed-set identification requires >= 2 samples per instance");
    }
  }

  // Seeded gallery order per instance, fixed across folds.
  std::vector<std::vector<std::size_t>> instance_samples;
  instance_samples.reserve(by_instance.size());
  for (const auto& [id, samples] : by_instance) {
    auto order = samples;  // record order, already deterministic
    Rng rng(derive_seed(seed, id));
    rng.shuffle(order);
    instance_samples.push_back(std::move(order));
  }

  IdentificationReport report;
  report.fold_count = folds;
  report.per_fold.resize(folds);
  for (int fold = 0; fold < folds; ++fold) {
    std::vector<std::size_t> gallery;  // one template per instance
    std::vector<std::size_t> probes;
    for (const auto& order : instance_samples) {
      const std::size_t g = order[static_cast<std::size_t>(fold) % order.size()];
      gallery.push_back(g);
      for (std::size_t s : order) {
        if (s != g) probes.push_back(s);
      }
    }
    std::sort(probes.begin(), probes.end());

    std::vector<int> probe_rank(probes.size(), 0);
    parallel_for(probes.size(), threads, [&](std::size_t p) {
      const auto& probe_rec = archive.records[probes[p]];
      const std::uint64_t true_instance = probe_rec.key.instance_id();
      double true_score = 0;
      std::size_t true_index = 0;
      std::vector<double> gallery_scores(gallery.size());
      for (std::size_t g = 0; g < gallery.size(); ++g) {
        gallery_scores[g] =
            detail::dot_index_order(probe_rec.vec, archive.records[gallery[g]].vec);
        if (archive.records[gallery[g]].key.instance_id() == true_instance) {
          true_score = gallery_scores[g];
          true_index = g;
        }
      }
      int rank = 1;
      for (std::size_t g = 0; g < gallery.size(); ++g) {
        if (g == true_index) continue;
        if (gallery_scores[g] > true_score ||
            (gallery_scores[g] == true_score && g < true_index)) {
          ++rank;
        }
      }
      probe_rank[p] = rank;
    });

    std::vector<double>& rates = report.per_fold[fold];
    rates.assign(static_cast<std::size_t>(max_rank), 0.0);
    for (int rank : probe_rank) {
      if (rank <= max_rank) rates[static_cast<std::size_t>(rank) - 1] += 1.0;
    }
    double cum = 0;
    for (auto& r : rates) {
      cum += r;
      r = cum / static_cast<double>(probes.size());
    }
  }

  report.ranks.assign(static_cast<std::size_t>(max_rank), 0.0);
  report.rank_std.assign(static_cast<std::size_t>(max_rank), 0.0);
  for (int k = 0; k < max_rank; ++k) {
    double mean = 0;
    for (const auto& fold : report.per_fold) mean += fold[static_cast<std::size_t>(k)];
    mean /= folds;
    report.ranks[static_cast<std::size_t>(k)] = mean;
    if (folds > 1) {
      double var = 0;
      for (const auto& fold : report.per_fold) {
        const double d = fold[static_cast<std::size_t>(k)] - mean;
        var += d * d;
      }
      report.rank_std[static_cast<std::size_t>(k)] = std::sqrt(var / (folds - 1));
    }
  }
  return report;
}

}  // namespace fplfix
