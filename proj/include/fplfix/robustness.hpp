#pragma once

#include <optional>
#include <vector>

#include "fplfix/compare.hpp"
#include "fplfix/metrics.hpp"
#include "fplfix/pipeline.hpp"
#include "fplfix/preprocess.hpp"

namespace fplfix {

struct PerturbationGridConfig {
  std::vector<double> r_values = {0, 10, 20, 30, 40, 50};  // max rotation, degrees
  std::vector<double> t_values = {0, 10, 20, 30, 40, 50};  // max translation, pixels
  double fmr_target = 0.001;
  std::uint64_t seed = 0;
  std::optional<std::size_t> non_mated_cap;  // for the baseline threshold run
};

struct PerturbationGrid {
  std::vector<double> r_values;
  std::vector<double> t_values;
  std::vector<double> fnmr;  // row-major, indexed (t, r)
  double fmr_target = 0.001;
  double frozen_threshold = 0;
  double baseline_fnmr = 0;
  bool resolution_warning = false;
  std::uint64_t seed = 0;

  double at(std::size_t t_idx, std::size_t r_idx) const {
    return fnmr[t_idx * r_values.size() + r_idx];
  }
};

// The rotation/translation robustness study. References stay clean; probes
// are perturbed with draws from U[-r, r] x U[-t, t]^2 before re-extraction.
// Every cell is evaluated at the single threshold frozen from the unperturbed
// run, so cells are comparable: mated comparisons scoring below it (or failing
// to extract) count as non-matches.
inline PerturbationGrid perturbation_study(const std::vector<GrayImage>& images,
                                           const std::vector<SampleKey>& keys,
                                           const ExtractorConfig& extractor,
                                           const PerturbationGridConfig& config,
                                           const ProjectionModel* reduction = nullptr,
                                           int threads = 0) {
  if (config.r_values.empty() || config.t_values.empty()) {
    throw InvalidArgument("perturbation grid needs at least one r and one t value");
  }

  // Unperturbed references and the frozen operating point.
  EmbeddingArchive references =
      extract_embeddings(images, keys, extractor, /*allow_degenerate=*/false, threads).archive;
  if (reduction) references = project_archive(*reduction, references, threads);
  const ScoreSet baseline =
      all_pairs_scores(references, config.non_mated_cap, config.seed, threads);
  const FnmrAtFmr operating_point = fnmr_at_fmr(baseline, config.fmr_target);

  PerturbationGrid grid;
  grid.r_values = config.r_values;
  grid.t_values = config.t_values;
  grid.fmr_target = config.fmr_target;
  grid.frozen_threshold = operating_point.threshold;
  grid.baseline_fnmr = operating_point.fnmr;
  grid.resolution_warning = operating_point.resolution_warning;
  grid.seed = config.seed;
  grid.fnmr.resize(config.r_values.size() * config.t_values.size());

  // Instance groups for the mated probe-vs-reference comparisons.
  std::vector<std::vector<std::size_t>> groups;
  {
    std::map<std::uint64_t, std::vector<std::size_t>> by_instance;
    for (std::size_t i = 0; i < references.records.size(); ++i) {
      by_instance[references.records[i].key.instance_id()].push_back(i);
    }
    for (auto& [id, members] : by_instance) groups.push_back(std::move(members));
  }
  std::map<SampleKey, std::size_t> ref_index;
  for (std::size_t i = 0; i < references.records.size(); ++i) {
    ref_index[references.records[i].key] = i;
  }

  for (std::size_t ti = 0; ti < config.t_values.size(); ++ti) {
    for (std::size_t ri = 0; ri < config.r_values.size(); ++ri) {
      const std::uint64_t cell_seed = derive_seed(config.seed, ti, ri);
      std::vector<GrayImage> perturbed(images.size());
      parallel_for(images.size(), threads, [&](std::size_t i) {
        AugmentationParams params;
        params.max_rotation_deg = config.r_values[ri];
        params.max_shift_px = config.t_values[ti];
        params.seed = derive_seed(cell_seed, i);
        perturbed[i] = augment(images[i], params);
      });
      ExtractionResult probes =
          extract_embeddings(perturbed, keys, extractor, /*allow_degenerate=*/true, threads);
      if (reduction) probes.archive = project_archive(*reduction, probes.archive, threads);

      std::map<SampleKey, const std::vector<float>*> probe_vec;
      for (const auto& rec : probes.archive.records) probe_vec[rec.key] = &rec.vec;

      // Ordered mated comparisons: perturbed probe vs every clean reference of
      // the same instance (other samples only).
      std::uint64_t total = 0, non_match = 0;
      for (const auto& group : groups) {
        for (std::size_t pi : group) {
          const SampleKey probe_key = references.records[pi].key;
          const auto vec_it = probe_vec.find(probe_key);
          for (std::size_t rj : group) {
            if (rj == pi) continue;
            ++total;
            if (vec_it == probe_vec.end()) {
              ++non_match;  // degenerate extraction counts as a non-match
              continue;
            }
            const double score = detail::clamp_score(
                detail::dot_index_order(*vec_it->second, references.records[rj].vec));
            if (score < grid.frozen_threshold) ++non_match;
          }
        }
      }
      grid.fnmr[ti * config.r_values.size() + ri] =
          static_cast<double>(non_match) / static_cast<double>(total);
    }
  }
  return grid;
}

}  // namespace fplfix
