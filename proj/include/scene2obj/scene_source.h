// Per-image scene distributions P(s|I) from interchangeable sources.

#ifndef SCENE2OBJ_SCENE_SOURCE_H_
#define SCENE2OBJ_SCENE_SOURCE_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scene2obj/corpus_io.h"

namespace scene2obj {

struct SceneDistribution {
  std::string image_id;
  std::vector<double> probs;  // indexed by canonical scene

  bool operator==(const SceneDistribution&) const = default;
};

// Throws std::invalid_argument unless probs are >= 0 and sum to 1 +- tol.
void validate_distribution(const SceneDistribution& dist, double tol = 1e-6);

struct SceneSourceResult {
  std::vector<SceneDistribution> distributions;
  std::size_t skipped = 0;  // images or rows that could not be mapped
  std::vector<std::string> skipped_ids;
};

// One-hot on each image's annotated (canonical) scene.
SceneSourceResult perfect_source(const std::vector<ImageAnnotation>& annotations,
                                 const Vocabulary& vocab);

struct Normalization {
  enum class Kind { kSum, kSoftmax };
  Kind kind = Kind::kSum;
  double temperature = 1.0;

  // "sum" or "softmax" or "softmax:<temperature>".
  static Normalization parse(std::string_view text);
};

// Sums scores of original labels onto their canonical scene, then
// normalizes. Scene names unknown to the vocabulary are dropped and counted
// in `skipped`. Throws std::invalid_argument for rows that cannot be
// normalized (all-zero mass, or negative scores under sum normalization).
SceneSourceResult scores_source(const std::vector<SceneScoreRow>& rows, const Vocabulary& vocab,
                                const Normalization& normalization = {});

SceneDistribution uniform_distribution(std::string image_id, std::size_t num_scenes);

// Synthetic classifier for testing: keeps `confidence` mass on the true
// scene and spreads the rest over `spread` other scenes drawn from a seeded
// stream per image.
SceneSourceResult noisy_source(const std::vector<ImageAnnotation>& annotations,
                               const Vocabulary& vocab, double confidence, std::size_t spread,
                               std::uint64_t seed);

// Scene indices by descending probability, ties by index ascending.
std::vector<std::size_t> rank_scenes(const std::vector<double>& probs);

// Fraction of images whose annotated scene is among the k most probable.
// Images without a distribution or with an unmappable label are ignored.
double topk_scene_accuracy(const std::vector<SceneDistribution>& distributions,
                           const std::vector<ImageAnnotation>& annotations,
                           const Vocabulary& vocab, std::size_t k);

}  // namespace scene2obj

#endif  // SCENE2OBJ_SCENE_SOURCE_H_
