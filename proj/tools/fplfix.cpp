#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fplfix/compare.hpp"
#include "fplfix/dataset.hpp"
#include "fplfix/embedding.hpp"
#include "fplfix/image_io.hpp"
#include "fplfix/metrics.hpp"
#include "fplfix/minutiae.hpp"
#include "fplfix/pipeline.hpp"
#include "fplfix/preprocess.hpp"
#include "fplfix/robustness.hpp"
#include "fplfix/synth.hpp"
#include "fplfix/texture.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::uint64_t> parse_u64_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoull(item));
  }
  if (out.empty()) throw fplfix::InvalidArgument("empty list: '" + csv + "'");
  return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw fplfix::InvalidArgument("empty list: '" + csv + "'");
  return out;
}

std::string fmt(double v) { return fplfix::detail::format_double(v); }

// Every run echoes its fully resolved configuration, defaults included.
class ConfigEcho {
 public:
  explicit ConfigEcho(std::string subcommand) : line_("[config] " + std::move(subcommand)) {}
  template <typename T>
  ConfigEcho& kv(const std::string& key, const T& value) {
    std::ostringstream os;
    os << value;
    line_ += " " + key + "=" + os.str();
    return *this;
  }
  void emit() const { std::cerr << line_ << "\n"; }

 private:
  std::string line_;
};

struct CorpusOnDisk {
  std::vector<fplfix::SampleRecord> records;
  std::vector<fplfix::GrayImage> images;
  std::vector<fplfix::SampleKey> keys;
};

CorpusOnDisk load_corpus(const std::string& manifest_path, int threads) {
  CorpusOnDisk corpus;
  corpus.records = fplfix::load_manifest(manifest_path);
  corpus.images = fplfix::load_manifest_images(corpus.records, manifest_path, threads);
  corpus.keys.reserve(corpus.records.size());
  for (const auto& r : corpus.records) corpus.keys.push_back(r.key);
  return corpus;
}

std::string sample_filename(const fplfix::SampleKey& key) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "s%04u_f%u_i%02u.pgm", key.subject, key.finger, key.sample);
  return buf;
}

struct BankFlags {
  int orientations = 8;
  std::string frequencies = "0.16666666666666666,0.1111111111111111,0.08333333333333333";
  int grid = 8;
  int map_size = 64;
  int minutiae_grid = 8;

  fplfix::ExtractorConfig make(fplfix::Branch branch) const {
    fplfix::ExtractorConfig config;
    config.branch = branch;
    config.texture.orientations = orientations;
    config.texture.frequencies = parse_double_list(frequencies);
    config.texture.grid = grid;
    config.map_params.map_size = map_size;
    config.minutiae_grid = minutiae_grid;
    return config;
  }
};

void add_bank_flags(CLI::App* cmd, BankFlags& flags) {
  cmd->add_option("--orientations", flags.orientations, "texture bank orientations");
  cmd->add_option("--frequencies", flags.frequencies, "texture bank frequencies (cycles/px)");
  cmd->add_option("--grid", flags.grid, "texture pooling grid");
  cmd->add_option("--map-size", flags.map_size, "minutiae map resolution");
  cmd->add_option("--minutiae-grid", flags.minutiae_grid, "minutiae pooling grid");
}

// Reduces an archive to dim N; fits PCA on the archive itself unless a model
// is supplied. Returns the model actually used (empty for truncate).
fplfix::EmbeddingArchive reduce_archive(const fplfix::EmbeddingArchive& raw, std::uint32_t dim,
                                        const std::string& method,
                                        const std::string& load_model_path,
                                        const std::string& save_model_path, int threads) {
  if (dim == raw.dim) return raw;
  if (dim > raw.dim) {
    throw fplfix::InvalidArgument("dim " + std::to_string(dim) +
                                  " exceeds raw feature dimension " + std::to_string(raw.dim));
  }
  if (method == "truncate") {
    return fplfix::truncate_archive(raw, dim, threads);
  }
  if (method != "pca") throw fplfix::InvalidArgument("unknown reduction method: " + method);
  fplfix::ProjectionModel model;
  if (!load_model_path.empty()) {
    model = fplfix::read_projection(load_model_path);
    if (model.output_dim != dim) model = model.head(dim);
  } else {
    std::vector<std::vector<float>> train;
    train.reserve(raw.records.size());
    for (const auto& r : raw.records) train.push_back(r.vec);
    model = fplfix::fit_projection(train, dim);
  }
  if (!save_model_path.empty()) fplfix::write_projection(model, save_model_path);
  return fplfix::project_archive(model, raw, threads);
}

int run_synth(int identities, int samples, std::uint64_t seed, const std::string& out_dir,
              int threads) {
  ConfigEcho("synth")
      .kv("identities", identities)
      .kv("samples", samples)
      .kv("seed", seed)
      .kv("out", out_dir)
      .kv("threads", fplfix::resolve_threads(threads))
      .emit();
  fplfix::SynthCorpus corpus = fplfix::generate_corpus(identities, samples, seed, {}, threads);
  fs::create_directories(fs::path(out_dir) / "images");
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    const std::string name = sample_filename(corpus.manifest[i].key);
    corpus.manifest[i].image_path = "images/" + name;
    fplfix::save_pgm(corpus.images[i], (fs::path(out_dir) / "images" / name).string());
  }
  fplfix::save_manifest(corpus.manifest, (fs::path(out_dir) / "manifest.csv").string());
  fplfix::save_minutiae(corpus.minutiae_truth, (fs::path(out_dir) / "minutiae.csv").string());
  return 0;
}

int run_enhance(const std::string& in_dir, const std::string& out_dir, bool binarize,
                int block_size, double sigma, int threads) {
  ConfigEcho("enhance")
      .kv("in", in_dir)
      .kv("out", out_dir)
      .kv("binarize", binarize ? 1 : 0)
      .kv("block_size", block_size)
      .kv("sigma", sigma)
      .kv("threads", fplfix::resolve_threads(threads))
      .emit();
  CorpusOnDisk corpus = load_corpus((fs::path(in_dir) / "manifest.csv").string(), threads);
  fplfix::EnhancementParams params;
  params.binarize = binarize;
  params.block_size = block_size;
  params.gabor_sigma = sigma;
  std::vector<fplfix::GrayImage> enhanced(corpus.images.size());
  fplfix::parallel_for(corpus.images.size(), threads, [&](std::size_t i) {
    enhanced[i] = fplfix::enhance(corpus.images[i], params);
  });
  fs::create_directories(fs::path(out_dir) / "images");
  for (std::size_t i = 0; i < enhanced.size(); ++i) {
    const std::string name = sample_filename(corpus.records[i].key);
    corpus.records[i].image_path = "images/" + name;
    fplfix::save_pgm(enhanced[i], (fs::path(out_dir) / "images" / name).string());
  }
  fplfix::save_manifest(corpus.records, (fs::path(out_dir) / "manifest.csv").string());
  return 0;
}

int run_augment(const std::string& in_dir, const std::string& out_dir, double rot, double shift,
                double brightness, double contrast, std::uint64_t seed, int threads) {
  ConfigEcho("augment")
      .kv("in", in_dir)
      .kv("out", out_dir)
      .kv("rot", rot)
      .kv("shift", shift)
      .kv("brightness", brightness)
      .kv("contrast", contrast)
      .kv("seed", seed)
      .kv("threads", fplfix::resolve_threads(threads))
      .emit();
  CorpusOnDisk corpus = load_corpus((fs::path(in_dir) / "manifest.csv").string(), threads);
  std::vector<fplfix::GrayImage> augmented(corpus.images.size());
  fplfix::parallel_for(corpus.images.size(), threads, [&](std::size_t i) {
    fplfix::AugmentationParams params;
    params.max_rotation_deg = rot;
    params.max_shift_px = shift;
    params.brightness_delta = brightness;
    params.contrast_delta = contrast;
    params.seed = fplfix::derive_seed(seed, i);
    augmented[i] = fplfix::augment(corpus.images[i], params);
  });
  fs::create_directories(fs::path(out_dir) / "images");
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    const std::string name = sample_filename(corpus.records[i].key);
    corpus.records[i].image_path = "images/" + name;
    fplfix::save_pgm(augmented[i], (fs::path(out_dir) / "images" / name).string());
  }
  fplfix::save_manifest(corpus.records, (fs::path(out_dir) / "manifest.csv").string());
  return 0;
}

int run_extract(const std::string& manifest, const std::string& branch_name,
                const std::string& out_path, std::uint32_t dim, const std::string& method,
                const std::string& minutiae_file, const std::string& load_model,
                const std::string& save_model, const BankFlags& bank, int threads) {
  ConfigEcho("extract")
      .kv("manifest", manifest)
      .kv("branch", branch_name)
      .kv("out", out_path)
      .kv("dim", dim)
      .kv("method", method)
      .kv("minutiae", minutiae_file.empty() ? "<detect>" : minutiae_file)
      .kv("threads", fplfix::resolve_threads(threads))
      .emit();
  CorpusOnDisk corpus = load_corpus(manifest, threads);
  fplfix::ExtractorConfig config = bank.make(fplfix::branch_from_string(branch_name));
  std::map<fplfix::SampleKey, std::vector<fplfix::Minutia>> truth;
  if (!minutiae_file.empty()) {
    truth = fplfix::load_minutiae(minutiae_file);
    config.minutiae_truth = &truth;
  }
  fplfix::EmbeddingArchive raw =
      fplfix::extract_embeddings(corpus.images, corpus.keys, config, false, threads).archive;
  if (dim == 0) dim = raw.dim;
  const fplfix::EmbeddingArchive reduced =
      reduce_archive(raw, dim, method, load_model, save_model, threads);
  fplfix::write_archive(reduced, out_path);
  return 0;
}

int run_reduce(const std::string& archive_path, std::uint32_t dim, const std::string& method,
               const std::string& out_path, const std::string& fit_archive,
               const std::string& load_model, const std::string& save_model, int threads) {
  ConfigEcho("reduce")
      .kv("archive", archive_path)
      .kv("dim", dim)
      .kv("method", method)
      .kv("out", out_path)
      .kv("threads", fplfix::resolve_threads(threads))
      .emit();
  const fplfix::EmbeddingArchive raw = fplfix::read_archive(archive_path);
  std::string model_source = load_model;
  if (model_source.empty() && !fit_archive.empty() && method == "pca") {
    const fplfix::EmbeddingArchive train_archive = fplfix::read_archive(fit_archive);
    std::vector<std::vector<float>> train;
    train.reserve(train_archive.records.size());
    for (const auto& r : train_archive.records) train.push_back(r.vec);
    const fplfix::ProjectionModel model = fplfix::fit_projection(train, dim);
    if (!save_model.empty()) fplfix::write_projection(model, save_model);
    fplfix::write_archive(fplfix::project_archive(model, raw, threads), out_path);
    return 0;
  }
  fplfix::write_archive(reduce_archive(raw, dim, method, model_source, save_model, threads),
                        out_path);
  return 0;
}

int run_compare(const std::string& archive_path, std::optional<std::size_t> cap,
                std::uint64_t seed, const std::string& out_path, int threads) {
  ConfigEcho("compare")
      .kv("archive", archive_path)
      .kv("non_mated_cap", cap ? std::to_string(*cap) : "none")
      .kv("seed", seed)
      .kv("out", out_path)
      .kv("threads", fplfix::resolve_threads(threads))
      .emit();
  const fplfix::EmbeddingArchive archive = fplfix::read_archive(archive_path);
  const fplfix::ScoreSet scores = fplfix::all_pairs_scores(archive, cap, seed, threads);
  fplfix::save_scores(scores, out_path);
  return 0;
}

int run_workload(const std::string& sizes_csv, std::uint64_t baseline,
                 const std::string& out_path) {
  ConfigEcho("workload").kv("sizes", sizes_csv).kv("baseline", baseline).kv("out", out_path).emit();
  const auto sizes = parse_u64_list(sizes_csv);
  const auto table = fplfix::workload_table(sizes, baseline);
  std::ofstream out(out_path);
  if (!out) throw fplfix::IoError("cannot write: " + out_path);
  out << "N,ops,percent\n";
  for (const auto& point : table) {
    out << point.n << "," << point.ops << "," << fmt(point.percent_of_baseline) << "\n";
  }
  return 0;
}

int run_eval_verify(const std::string& scores_path, const std::string& fmr_targets_csv,
                    int det_points, const std::string& out_path) {
  ConfigEcho("eval-verify")
      .kv("scores", scores_path)
      .kv("fmr_targets", fmr_targets_csv)
      .kv("det_points", det_points)
      .kv("out", out_path)
      .emit();
  const fplfix::ScoreSet scores = fplfix::load_scores(scores_path);
  const auto targets = parse_double_list(fmr_targets_csv);
  const fplfix::VerificationReport report =
      fplfix::evaluate_verification(scores, targets, det_points);

  json j;
  j["eer"] = report.eer;
  j["eer_threshold"] = report.eer_threshold;
  j["mated_count"] = scores.mated.size();
  j["non_mated_count"] = scores.non_mated.size();
  j["fnmr_at"] = json::object();
  for (const auto& [target, r] : report.fnmr_at) {
    json entry;
    entry["fnmr"] = r.fnmr;
    entry["threshold"] = r.threshold;
    entry["resolution_warning"] = r.resolution_warning;
    j["fnmr_at"][fmt(target)] = entry;
  }
  j["det_points"] = report.det.size();
  std::ofstream out(out_path);
  if (!out) throw fplfix::IoError("cannot write: " + out_path);
  out << j.dump(2) << "\n";

  const fs::path det_path = fs::path(out_path).parent_path() / "det.csv";
  std::ofstream det(det_path);
  if (!det) throw fplfix::IoError("cannot write: " + det_path.string());
  det << "fmr,fnmr\n";
  for (const auto& p : report.det) det << fmt(p.fmr) << "," << fmt(p.fnmr) << "\n";
  return 0;
}

int run_eval_identify(const std::string& archive_path, int folds, int max_rank,
                      std::uint64_t seed, const std::string& out_path, int threads) {
  ConfigEcho("eval-identify")
      .kv("archive", archive_path)
      .kv("folds", folds)
      .kv("max_rank", max_rank)
      .kv("seed", seed)
      .kv("out", out_path)
      .kv("threads", fplfix::resolve_threads(threads))
      .emit();
  const fplfix::EmbeddingArchive archive = fplfix::read_archive(archive_path);
  const fplfix::IdentificationReport report =
      fplfix::closed_set_identification(archive, folds, max_rank, seed, threads);
  std::ofstream out(out_path);
  if (!out) throw fplfix::IoError("cannot write: " + out_path);
  out << "rank,rate_mean,rate_std\n";
  for (int k = 0; k < max_rank; ++k) {
    out << (k + 1) << "," << fmt(report.ranks[static_cast<std::size_t>(k)]) << ","
        << fmt(report.rank_std[static_cast<std::size_t>(k)]) << "\n";
  }
  return 0;
}

int run_perturb_grid(const std::string& manifest, const std::string& branch_name,
                     std::uint32_t dim, double fmr, const std::string& r_csv,
                     const std::string& t_csv, std::uint64_t seed, const std::string& out_path,
                     const std::string& minutiae_file, std::optional<std::size_t> cap,
                     const BankFlags& bank, int threads) {
  ConfigEcho("perturb-grid")
      .kv("manifest", manifest)
      .kv("branch", branch_name)
      .kv("dim", dim)
      .kv("fmr", fmr)
      .kv("r", r_csv)
      .kv("t", t_csv)
      .kv("seed", seed)
      .kv("out", out_path)
      .kv("threads", fplfix::resolve_threads(threads))
      .emit();
  CorpusOnDisk corpus = load_corpus(manifest, threads);
  fplfix::ExtractorConfig config = bank.make(fplfix::branch_from_string(branch_name));
  std::map<fplfix::SampleKey, std::vector<fplfix::Minutia>> truth;
  if (!minutiae_file.empty()) {
    truth = fplfix::load_minutiae(minutiae_file);
    config.minutiae_truth = &truth;
  }

  fplfix::PerturbationGridConfig grid_config;
  grid_config.r_values = parse_double_list(r_csv);
  grid_config.t_values = parse_double_list(t_csv);
  grid_config.fmr_target = fmr;
  grid_config.seed = seed;
  grid_config.non_mated_cap = cap;

  std::optional<fplfix::ProjectionModel> model;
  if (dim != 0 && dim != static_cast<std::uint32_t>(config.raw_dim())) {
    const fplfix::EmbeddingArchive raw =
        fplfix::extract_embeddings(corpus.images, corpus.keys, config, false, threads).archive;
    std::vector<std::vector<float>> train;
    train.reserve(raw.records.size());
    for (const auto& r : raw.records) train.push_back(r.vec);
    model = fplfix::fit_projection(train, dim);
  }

  const fplfix::PerturbationGrid grid = fplfix::perturbation_study(
      corpus.images, corpus.keys, config, grid_config, model ? &*model : nullptr, threads);

  std::ofstream out(out_path);
  if (!out) throw fplfix::IoError("cannot write: " + out_path);
  out << "t,r,fnmr\n";
  for (std::size_t ti = 0; ti < grid.t_values.size(); ++ti) {
    for (std::size_t ri = 0; ri < grid.r_values.size(); ++ri) {
      out << fmt(grid.t_values[ti]) << "," << fmt(grid.r_values[ri]) << ","
          << fmt(grid.at(ti, ri)) << "\n";
    }
  }
  json sidecar;
  sidecar["frozen_threshold"] = grid.frozen_threshold;
  sidecar["baseline_fnmr"] = grid.baseline_fnmr;
  sidecar["fmr_target"] = grid.fmr_target;
  sidecar["seed"] = grid.seed;
  sidecar["resolution_warning"] = grid.resolution_warning;
  std::ofstream side(out_path + ".json");
  if (!side) throw fplfix::IoError("cannot write: " + out_path + ".json");
  side << sidecar.dump(2) << "\n";
  return 0;
}

int run_sweep(const std::string& manifest, const std::string& branch_name,
              const std::string& dims_csv, double fmr, const std::string& out_path,
              const std::string& minutiae_file, bool no_cache,
              std::optional<std::size_t> cap, std::uint64_t seed, const BankFlags& bank,
              int threads) {
  ConfigEcho("sweep")
      .kv("manifest", manifest)
      .kv("branch", branch_name)
      .kv("dims", dims_csv)
      .kv("fmr", fmr)
      .kv("out", out_path)
      .kv("cache", no_cache ? 0 : 1)
      .kv("seed", seed)
      .kv("threads", fplfix::resolve_threads(threads))
      .emit();
  CorpusOnDisk corpus = load_corpus(manifest, threads);
  fplfix::ExtractorConfig config = bank.make(fplfix::branch_from_string(branch_name));
  std::map<fplfix::SampleKey, std::vector<fplfix::Minutia>> truth;
  if (!minutiae_file.empty()) {
    truth = fplfix::load_minutiae(minutiae_file);
    config.minutiae_truth = &truth;
  }
  const auto dims = parse_u64_list(dims_csv);
  for (std::uint64_t n : dims) {
    if (n < 1 || n > static_cast<std::uint64_t>(config.raw_dim())) {
      throw fplfix::InvalidArgument("dim " + std::to_string(n) +
                                    " outside [1, raw_dim=" + std::to_string(config.raw_dim()) +
                                    "]");
    }
  }
  const std::uint32_t max_dim = static_cast<std::uint32_t>(*std::max_element(dims.begin(), dims.end()));

  auto extract_raw = [&]() {
    return fplfix::extract_embeddings(corpus.images, corpus.keys, config, false, threads).archive;
  };
  auto evaluate_at = [&](const fplfix::EmbeddingArchive& raw, std::uint32_t n,
                         const fplfix::ProjectionModel* shared_model) {
    fplfix::EmbeddingArchive reduced;
    if (n == raw.dim) {
      reduced = raw;
    } else if (shared_model) {
      reduced = fplfix::project_archive(shared_model->head(n), raw, threads);
    } else {
      std::vector<std::vector<float>> train;
      train.reserve(raw.records.size());
      for (const auto& r : raw.records) train.push_back(r.vec);
      reduced = fplfix::project_archive(fplfix::fit_projection(train, n), raw, threads);
    }
    const fplfix::ScoreSet scores = fplfix::all_pairs_scores(reduced, cap, seed, threads);
    const auto [eer_value, eer_threshold] = fplfix::eer(scores);
    (void)eer_threshold;
    return std::make_pair(fplfix::fnmr_at_fmr(scores, fmr).fnmr, eer_value);
  };

  std::ofstream out(out_path);
  if (!out) throw fplfix::IoError("cannot write: " + out_path);
  out << "N,ops,fnmr,eer\n";
  if (no_cache) {
    for (std::uint64_t n : dims) {
      const fplfix::EmbeddingArchive raw = extract_raw();
      const auto [fnmr, eer_value] = evaluate_at(raw, static_cast<std::uint32_t>(n), nullptr);
      out << n << "," << fplfix::op_count(n) << "," << fmt(fnmr) << "," << fmt(eer_value) << "\n";
    }
  } else {
    const fplfix::EmbeddingArchive raw = extract_raw();
    std::optional<fplfix::ProjectionModel> shared;
    if (max_dim < raw.dim) {
      std::vector<std::vector<float>> train;
      train.reserve(raw.records.size());
      for (const auto& r : raw.records) train.push_back(r.vec);
      shared = fplfix::fit_projection(train, max_dim);
    }
    for (std::uint64_t n : dims) {
      const auto [fnmr, eer_value] =
          evaluate_at(raw, static_cast<std::uint32_t>(n), shared ? &*shared : nullptr);
      out << n << "," << fplfix::op_count(n) << "," << fmt(fnmr) << "," << fmt(eer_value) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fplfix: fixed-length fingerprint representation toolkit"};
  app.require_subcommand(0, 1);

  int threads = 0;
  app.add_option("--threads", threads, "worker cap (0 = FPLFIX_THREADS or hardware)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  int synth_identities = 10, synth_samples = 12;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--identities", synth_identities, "number of synthetic fingers")->required();
  synth->add_option("--samples", synth_samples, "samples per identity")->required();
  synth->add_option("--seed", synth_seed, "master seed (default 0)");
  synth->add_option("--out", synth_out, "output directory")->required();

  // enhance
  auto* enhance = app.add_subcommand("enhance", "Gabor ridge enhancement over a manifest");
  std::string enh_in, enh_out;
  bool enh_binarize = false;
  int enh_block = 16;
  double enh_sigma = 4.0;
  enhance->add_option("--in", enh_in, "input directory holding manifest.csv")->required();
  enhance->add_option("--out", enh_out, "output directory")->required();
  enhance->add_flag("--binarize", enh_binarize, "binarize by per-block mean threshold");
  enhance->add_option("--block-size", enh_block, "orientation/frequency block size");
  enhance->add_option("--sigma", enh_sigma, "Gabor envelope sigma, pixels");

  // augment
  auto* augment = app.add_subcommand("augment", "random rotation/shift/brightness/contrast");
  std::string aug_in, aug_out;
  double aug_rot = 0, aug_shift = 0, aug_brightness = 0, aug_contrast = 0;
  std::uint64_t aug_seed = 0;
  augment->add_option("--in", aug_in, "input directory holding manifest.csv")->required();
  augment->add_option("--out", aug_out, "output directory")->required();
  augment->add_option("--rot", aug_rot, "max rotation r, degrees: draws from U[-r, r]");
  augment->add_option("--shift", aug_shift, "max shift t, pixels: draws from U[-t, t]^2");
  augment->add_option("--brightness", aug_brightness, "max brightness delta, fraction");
  augment->add_option("--contrast", aug_contrast, "max contrast delta, fraction");
  augment->add_option("--seed", aug_seed, "seed (default 0)");

  // extract
  auto* extract = app.add_subcommand("extract", "embed every manifest sample");
  std::string ext_manifest, ext_branch = "texture", ext_out, ext_minutiae, ext_method = "pca";
  std::string ext_load_model, ext_save_model;
  std::uint32_t ext_dim = 0;
  BankFlags ext_bank;
  extract->add_option("--manifest", ext_manifest, "manifest CSV")->required();
  extract->add_option("--branch", ext_branch, "texture | minutiae | concat");
  extract->add_option("--out", ext_out, "output archive (.fpeb)")->required();
  extract->add_option("--dim", ext_dim, "target embedding size (0 = raw)");
  extract->add_option("--method", ext_method, "reduction method: pca | truncate");
  extract->add_option("--minutiae", ext_minutiae, "ground-truth minutiae CSV (else detect)");
  extract->add_option("--use-model", ext_load_model, "apply an existing projection (.fppj)");
  extract->add_option("--save-model", ext_save_model, "persist the fitted projection (.fppj)");
  add_bank_flags(extract, ext_bank);

  // reduce
  auto* reduce = app.add_subcommand("reduce", "change archive dimensionality");
  std::string red_archive, red_out, red_method = "pca", red_fit, red_load, red_save;
  std::uint32_t red_dim = 0;
  reduce->add_option("--archive", red_archive, "input archive (.fpeb)")->required();
  reduce->add_option("--dim", red_dim, "target embedding size")->required();
  reduce->add_option("--method", red_method, "pca | truncate");
  reduce->add_option("--out", red_out, "output archive (.fpeb)")->required();
  reduce->add_option("--fit-archive", red_fit, "fit the projection on this archive instead");
  reduce->add_option("--use-model", red_load, "apply an existing projection (.fppj)");
  reduce->add_option("--save-model", red_save, "persist the fitted projection (.fppj)");

  // compare
  auto* compare = app.add_subcommand("compare", "exhaustive mated/non-mated scores");
  std::string cmp_archive, cmp_out;
  std::uint64_t cmp_seed = 0;
  std::int64_t cmp_cap = -1;
  compare->add_option("--archive", cmp_archive, "archive (.fpeb)")->required();
  compare->add_option("--non-mated-cap", cmp_cap, "subsample non-mated pairs to this count");
  compare->add_option("--seed", cmp_seed, "subsampling seed (default 0)");
  compare->add_option("--out", cmp_out, "scores CSV")->required();

  // workload
  auto* workload = app.add_subcommand("workload", "operation counts per embedding size");
  std::string wl_sizes = "32,64,128,256,512,1024,2048", wl_out;
  std::uint64_t wl_baseline = 2048;
  workload->add_option("--sizes", wl_sizes, "comma-separated embedding sizes");
  workload->add_option("--baseline", wl_baseline, "baseline N for the percent column");
  workload->add_option("--out", wl_out, "output CSV (N,ops,percent)")->required();

  // eval-verify
  auto* everify = app.add_subcommand("eval-verify", "EER / FNMR@FMR / DET from a score file");
  std::string ev_scores, ev_targets = "0.001", ev_out;
  int ev_det_points = 100;
  everify->add_option("--scores", ev_scores, "scores CSV")->required();
  everify->add_option("--fmr-targets", ev_targets, "comma-separated FMR targets");
  everify->add_option("--det-points", ev_det_points, "DET curve resolution");
  everify->add_option("--out", ev_out, "report JSON (det.csv written alongside)")->required();

  // eval-identify
  auto* eidentify = app.add_subcommand("eval-identify", "closed-set CMC with cross-validation");
  std::string ei_archive, ei_out;
  int ei_folds = 10, ei_max_rank = 20;
  std::uint64_t ei_seed = 0;
  eidentify->add_option("--archive", ei_archive, "archive (.fpeb)")->required();
  eidentify->add_option("--folds", ei_folds, "cross-validation folds");
  eidentify->add_option("--max-rank", ei_max_rank, "largest rank to report");
  eidentify->add_option("--seed", ei_seed, "gallery draw seed (default 0)");
  eidentify->add_option("--out", ei_out, "CMC CSV (rank,rate_mean,rate_std)")->required();

  // perturb-grid
  auto* perturb = app.add_subcommand("perturb-grid", "FNMR under rotation/translation");
  std::string pg_manifest, pg_branch = "texture", pg_r = "0,10,20,30,40,50";
  std::string pg_t = "0,10,20,30,40,50", pg_out, pg_minutiae;
  std::uint32_t pg_dim = 0;
  double pg_fmr = 0.001;
  std::uint64_t pg_seed = 0;
  std::int64_t pg_cap = -1;
  BankFlags pg_bank;
  perturb->add_option("--manifest", pg_manifest, "manifest CSV")->required();
  perturb->add_option("--branch", pg_branch, "texture | minutiae | concat");
  perturb->add_option("--dim", pg_dim, "embedding size after PCA (0 = raw)");
  perturb->add_option("--fmr", pg_fmr, "FMR target fixing the threshold");
  perturb->add_option("--r", pg_r, "comma-separated max rotations, degrees");
  perturb->add_option("--t", pg_t, "comma-separated max translations, pixels");
  perturb->add_option("--seed", pg_seed, "perturbation seed (default 0)");
  perturb->add_option("--minutiae", pg_minutiae, "ground-truth minutiae CSV (else detect)");
  perturb->add_option("--non-mated-cap", pg_cap, "cap for the baseline threshold run");
  perturb->add_option("--out", pg_out, "heatmap CSV (t,r,fnmr); sidecar <out>.json")->required();
  add_bank_flags(perturb, pg_bank);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "embedding-size sweep: N,ops,fnmr,eer");
  std::string sw_manifest, sw_branch = "texture", sw_dims = "32,64,128,256,512,1024,2048";
  std::string sw_out, sw_minutiae;
  double sw_fmr = 0.001;
  bool sw_no_cache = false;
  std::uint64_t sw_seed = 0;
  std::int64_t sw_cap = -1;
  BankFlags sw_bank;
  sweep->add_option("--manifest", sw_manifest, "manifest CSV")->required();
  sweep->add_option("--branch", sw_branch, "texture | minutiae | concat");
  sweep->add_option("--dims", sw_dims, "comma-separated embedding sizes");
  sweep->add_option("--fmr", sw_fmr, "FMR target for the FNMR column");
  sweep->add_option("--minutiae", sw_minutiae, "ground-truth minutiae CSV (else detect)");
  sweep->add_flag("--no-cache", sw_no_cache, "re-extract raw embeddings per N");
  sweep->add_option("--non-mated-cap", sw_cap, "subsample non-mated pairs");
  sweep->add_option("--seed", sw_seed, "subsampling seed (default 0)");
  sweep->add_option("--out", sw_out, "output CSV")->required();
  add_bank_flags(sweep, sw_bank);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return 2;
  }

  try {
    auto cap_of = [](std::int64_t v) -> std::optional<std::size_t> {
      if (v < 0) return std::nullopt;
      return static_cast<std::size_t>(v);
    };
    if (synth->parsed()) {
      return run_synth(synth_identities, synth_samples, synth_seed, synth_out, threads);
    }
    if (enhance->parsed()) {
      return run_enhance(enh_in, enh_out, enh_binarize, enh_block, enh_sigma, threads);
    }
    if (augment->parsed()) {
      return run_augment(aug_in, aug_out, aug_rot, aug_shift, aug_brightness, aug_contrast,
                         aug_seed, threads);
    }
    if (extract->parsed()) {
      return run_extract(ext_manifest, ext_branch, ext_out, ext_dim, ext_method, ext_minutiae,
                         ext_load_model, ext_save_model, ext_bank, threads);
    }
    if (reduce->parsed()) {
      return run_reduce(red_archive, red_dim, red_method, red_out, red_fit, red_load, red_save,
                        threads);
    }
    if (compare->parsed()) {
      return run_compare(cmp_archive, cap_of(cmp_cap), cmp_seed, cmp_out, threads);
    }
    if (workload->parsed()) {
      return run_workload(wl_sizes, wl_baseline, wl_out);
    }
    if (everify->parsed()) {
      return run_eval_verify(ev_scores, ev_targets, ev_det_points, ev_out);
    }
    if (eidentify->parsed()) {
      return run_eval_identify(ei_archive, ei_folds, ei_max_rank, ei_seed, ei_out, threads);
    }
    if (perturb->parsed()) {
      return run_perturb_grid(pg_manifest, pg_branch, pg_dim, pg_fmr, pg_r, pg_t, pg_seed, pg_out,
                              pg_minutiae, cap_of(pg_cap), pg_bank, threads);
    }
    if (sweep->parsed()) {
      return run_sweep(sw_manifest, sw_branch, sw_dims, sw_fmr, sw_out, sw_minutiae, sw_no_cache,
                       cap_of(sw_cap), sw_seed, sw_bank, threads);
    }
  } catch (const std::exception& e) {
    std::cerr << "fplfix: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
