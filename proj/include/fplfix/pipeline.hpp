#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fplfix/dataset.hpp"
#include "fplfix/embedding.hpp"
#include "fplfix/image_io.hpp"
#include "fplfix/minutiae.hpp"
#include "fplfix/parallel.hpp"
#include "fplfix/preprocess.hpp"
#include "fplfix/synth.hpp"
#include "fplfix/texture.hpp"

namespace fplfix {

enum class Branch { texture, minutiae, concat };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::texture: return "texture";
    case Branch::minutiae: return "minutiae";
    case Branch::concat: return "concat";
  }
  return "?";
}

inline Branch branch_from_string(const std::string& s) {
  if (s == "texture") return Branch::texture;
  if (s == "minutiae") return Branch::minutiae;
  if (s == "concat") return Branch::concat;
  throw InvalidArgument("unknown branch: '" + s + "'");
}

struct ExtractorConfig {
  Branch branch = Branch::texture;
  TextureBankParams texture;
  MinutiaeMapParams map_params;
  int minutiae_grid = 8;
  EnhancementParams enhance_params{.block_size = 16, .gabor_sigma = 4.0, .binarize = true};
  // Ground-truth minutiae per sample (coordinates in the 299x299 frame).
  // When absent, the minutiae and concat branches detect from the image.
  const std::map<SampleKey, std::vector<Minutia>>* minutiae_truth = nullptr;

  int raw_dim() const {
    const int tex = texture.raw_dim();
    const int minu = kMinutiaeChannels * minutiae_grid * minutiae_grid;
    switch (branch) {
      case Branch::texture: return tex;
      case Branch::minutiae: return minu;
      case Branch::concat: return tex + minu;
    }
    return 0;
  }
};

struct ExtractionResult {
  EmbeddingArchive archive;           // order follows the input samples
  std::vector<SampleKey> degenerate;  // samples that produced no usable vector
};

// Embeds every sample. Degenerate samples (no texture energy, empty minutiae
// set) are dropped from the archive and listed separately when
// allow_degenerate is set; otherwise the first one aborts the run.
inline ExtractionResult extract_embeddings(const std::vector<GrayImage>& images,
                                           const std::vector<SampleKey>& keys,
                                           const ExtractorConfig& config,
                                           bool allow_degenerate = false, int threads = 0) {
  if (images.size() != keys.size()) {
    throw InvalidArgument("extract_embeddings: images/keys size mismatch");
  }
  const TextureBank bank(config.texture);
  const bool needs_texture = config.branch != Branch::minutiae;
  const bool needs_minutiae = config.branch != Branch::texture;

  std::vector<std::vector<float>> vectors(images.size());
  std::vector<std::uint8_t> failed(images.size(), 0);
  parallel_for(images.size(), threads, [&](std::size_t i) {
    try {
      const GrayImage* img = &images[i];
      GrayImage normalized;
      if (img->width != kNormalizedSize || img->height != kNormalizedSize) {
        normalized = crop_resize(*img);
        img = &normalized;
      }
      std::vector<float> tex;
      if (needs_texture) tex = bank.extract(*img);
      std::vector<float> minu;
      if (needs_minutiae) {
        std::vector<Minutia> list;
        if (config.minutiae_truth) {
          const auto it = config.minutiae_truth->find(keys[i]);
          if (it != config.minutiae_truth->end()) list = it->second;
        } else {
          list = detect_minutiae(enhance(*img, config.enhance_params));
        }
        minu = extract_minutiae_embedding(build_minutiae_map(list, config.map_params),
                                          config.minutiae_grid);
      }
      switch (config.branch) {
        case Branch::texture: vectors[i] = std::move(tex); break;
        case Branch::minutiae: vectors[i] = std::move(minu); break;
        case Branch::concat: vectors[i] = concat_branches(tex, minu); break;
      }
    } catch (const DegenerateInput&) {
      failed[i] = 1;
    }
  });

  ExtractionResult result;
  result.archive.dim = static_cast<std::uint32_t>(config.raw_dim());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (failed[i]) {
      if (!allow_degenerate) {
        throw DegenerateInput("sample " + keys[i].str() + " produced a degenerate embedding");
      }
      result.degenerate.push_back(keys[i]);
      continue;
    }
    result.archive.records.push_back({keys[i], std::move(vectors[i])});
  }
  return result;
}

// Applies a fitted projection to every record of an archive.
inline EmbeddingArchive project_archive(const ProjectionModel& model,
                                        const EmbeddingArchive& archive, int threads = 0) {
  EmbeddingArchive out;
  out.dim = model.output_dim;
  out.records.resize(archive.records.size());
  parallel_for(archive.records.size(), threads, [&](std::size_t i) {
    out.records[i].key = archive.records[i].key;
    out.records[i].vec = project(model, archive.records[i].vec);
  });
  return out;
}

inline EmbeddingArchive truncate_archive(const EmbeddingArchive& archive, std::size_t n,
                                         int threads = 0) {
  EmbeddingArchive out;
  out.dim = static_cast<std::uint32_t>(n);
  out.records.resize(archive.records.size());
  parallel_for(archive.records.size(), threads, [&](std::size_t i) {
    out.records[i].key = archive.records[i].key;
    out.records[i].vec = truncate(archive.records[i].vec, n);
  });
  return out;
}

// Loads the images referenced by a manifest. Relative image paths resolve
// against the manifest's directory.
inline std::vector<GrayImage> load_manifest_images(const std::vector<SampleRecord>& records,
                                                   const std::string& manifest_path,
                                                   int threads = 0) {
  std::string dir;
  const auto slash = manifest_path.find_last_of('/');
  if (slash != std::string::npos) dir = manifest_path.substr(0, slash + 1);
  std::vector<GrayImage> images(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const std::string& p = records[i].image_path;
    const bool absolute = !p.empty() && p.front() == '/';
    images[i] = load_image(absolute ? p : dir + p);
  });
  return images;
}

}  // namespace fplfix
