#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "fplfix/core.hpp"
#include "fplfix/dataset.hpp"
#include "fplfix/parallel.hpp"
#include "fplfix/rng.hpp"

namespace fplfix {

namespace detail {

// Index-order summation in double; both arguments traversed identically, so
// cosine(a, b) == cosine(b, a) bit-exactly.
template <typename T>
double dot_index_order(const std::vector<T>& a, const std::vector<T>& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

inline double clamp_score(double s) { return std::clamp(s, -1.0, 1.0); }

}  // namespace detail

// Cosine similarity of two unit-norm vectors: sum of products, clamped to
// [-1, 1] against rounding.
template <typename T>
double cosine(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine: length mismatch");
  if (a.empty()) throw InvalidArgument("cosine: empty vectors");
  double na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (std::abs(std::sqrt(na) - 1.0) > 1e-6 || std::abs(std::sqrt(nb) - 1.0) > 1e-6) {
    throw ContractViolation("cosine requires unit-norm inputs");
  }
  return detail::clamp_score(detail::dot_index_order(a, b));
}

// Operations per comparison at embedding size N: N multiplications followed
// by N - 1 additions.
inline std::uint64_t op_count(std::uint64_t n) {
  if (n < 1) throw InvalidArgument("op_count: N must be >= 1");
  return 2 * n - 1;
}

inline double workload_percent(std::uint64_t n, std::uint64_t n_base) {
  return 100.0 * static_cast<double>(op_count(n)) / static_cast<double>(op_count(n_base));
}

struct WorkloadPoint {
  std::uint64_t n = 0;
  std::uint64_t ops = 0;
  double percent_of_baseline = 0;
  std::optional<double> performance_measure;
};

inline std::vector<WorkloadPoint> workload_table(const std::vector<std::uint64_t>& sizes,
                                                 std::uint64_t baseline) {
  std::vector<WorkloadPoint> table;
  table.reserve(sizes.size());
  for (std::uint64_t n : sizes) {
    table.push_back({n, op_count(n), workload_percent(n, baseline), std::nullopt});
  }
  return table;
}

// All mated pairs (unordered, within instance) and all or a seeded uniform
// subsample of the non-mated pairs. Pairs are enumerated in archive record
// order; scoring parallelizes into preallocated slots so the result is
// independent of the thread count.
inline ScoreSet all_pairs_scores(const EmbeddingArchive& archive,
                                 std::optional<std::size_t> non_mated_cap = std::nullopt,
                                 std::uint64_t seed = 0, int threads = 0) {
  const std::size_t total = archive.records.size();
  if (total == 0) throw InvalidArgument("all_pairs_scores: empty archive");

  std::vector<std::uint64_t> instance_of(total);
  std::map<std::uint64_t, std::size_t> instance_sizes;
  for (std::size_t i = 0; i < total; ++i) {
    instance_of[i] = archive.records[i].key.instance_id();
    ++instance_sizes[instance_of[i]];
  }
  if (std::none_of(instance_sizes.begin(), instance_sizes.end(),
                   [](const auto& kv) { return kv.second >= 2; })) {
    throw InvalidArgument("all_pairs_scores: no instance has two samples");
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> mated_pairs;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> non_mated_pairs;
  std::uint64_t non_mated_total = 0;
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = i + 1; j < total; ++j) {
      if (instance_of[i] == instance_of[j]) {
        mated_pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
      } else {
        ++non_mated_total;
      }
    }
  }

  if (!non_mated_cap || *non_mated_cap >= non_mated_total) {
    non_mated_pairs.reserve(static_cast<std::size_t>(non_mated_total));
    for (std::size_t i = 0; i < total; ++i) {
      for (std::size_t j = i + 1; j < total; ++j) {
        if (instance_of[i] != instance_of[j]) {
          non_mated_pairs.emplace_back(static_cast<std::uint32_t>(i),
                                       static_cast<std::uint32_t>(j));
        }
      }
    }
  } else {
    // Uniform sample without replacement via rejection; re-sorted to the
    // canonical enumeration order afterwards.
    Rng rng(seed);
    std::set<std::pair<std::uint32_t, std::uint32_t>> chosen;
    while (chosen.size() < *non_mated_cap) {
      std::size_t i = static_cast<std::size_t>(rng.uniform_int(total));
      std::size_t j = static_cast<std::size_t>(rng.uniform_int(total));
      if (i == j || instance_of[i] == instance_of[j]) continue;
      if (i > j) std::swap(i, j);
      chosen.emplace(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    }
    non_mated_pairs.assign(chosen.begin(), chosen.end());
  }

  ScoreSet scores;
  scores.mated.resize(mated_pairs.size());
  scores.non_mated.resize(non_mated_pairs.size());
  auto score_into = [&](const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                        std::vector<ScoreEntry>& out) {
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
      const auto& rec_i = archive.records[pairs[p].first];
      const auto& rec_j = archive.records[pairs[p].second];
      out[p].probe = rec_i.key;
      out[p].gallery = rec_j.key;
      out[p].score = detail::clamp_score(detail::dot_index_order(rec_i.vec, rec_j.vec));
    });
  };
  score_into(mated_pairs, scores.mated);
  score_into(non_mated_pairs, scores.non_mated);
  return scores;
}

}  // namespace fplfix
