// From relation counts to object presence scores.
//
// The pipeline is
//
//   counts C -> raw P(o|s) = P(s|o) P(o) / P(s)    (P(s) uniform)
//            -> smoothed (1 - alpha) P(o|s) + alpha P(o)
//            -> sampled mean of D clamped normal draws per entry
//            -> P(o|I) = sum_s P(s|I) * table[s, o]
//
// alpha defaults to (#entries equal to 1) / (total count), and the draw
// spread defaults to the standard deviation of the smoothed table.

#ifndef SCENE2OBJ_PREDICTION_ENGINE_H_
#define SCENE2OBJ_PREDICTION_ENGINE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scene2obj/context_matrix.h"
#include "scene2obj/scene_source.h"

namespace scene2obj {

enum class TableStage { kRaw, kSmoothed, kSampled };

std::string_view to_string(TableStage stage);

// Dense S x O table of P(o|s) at one stage of the pipeline.
struct PosteriorTable {
  std::size_t num_scenes = 0;
  std::size_t num_objects = 0;
  std::vector<double> values;  // row-major, scene-major
  std::vector<double> prior;   // P(o)
  double alpha = 0;
  double sigma = 0;
  TableStage stage = TableStage::kRaw;

  double at(std::size_t scene, std::size_t object) const {
    return values[scene * num_objects + object];
  }
  double& at(std::size_t scene, std::size_t object) {
    return values[scene * num_objects + object];
  }
  std::vector<double> row(std::size_t scene) const;
};

// Throws std::invalid_argument for an all-zero matrix.
PosteriorTable compute_posterior(const ContextMatrix& matrix);

// Entries equal to exactly 1, divided by the total count.
double estimate_alpha(const ContextMatrix& matrix);

// Requires a raw table and alpha in [0, 1].
PosteriorTable smooth(const PosteriorTable& table, double alpha);

struct SigmaSource {
  enum class Kind {
    kProbStd,              // population std of the smoothed entries
    kCountStdNormalized,   // population std of the counts, scaled by S / N
    kFixed,
  };
  Kind kind = Kind::kProbStd;
  double value = 0;  // for kFixed

  // "prob-std", "count-std-normalized", or "fixed:<v>".
  static SigmaSource parse(std::string_view text);
};

// Requires a smoothed table.
double estimate_sigma(const ContextMatrix& matrix, const PosteriorTable& table,
                      const SigmaSource& source = {});

inline constexpr std::size_t kDefaultDraws = 10;

// Replaces each entry by the mean of `draws` normal samples around it,
// each clamped at zero. Entry (s, o) draws from its own stream keyed by
// (seed, s, o), so the result does not depend on `threads`. sigma == 0
// copies the smoothed values exactly.
PosteriorTable sample_table(const PosteriorTable& table, double sigma,
                            std::size_t draws = kDefaultDraws, std::uint64_t seed = 0,
                            unsigned threads = 1);

struct PresenceScores {
  std::string image_id;
  std::vector<double> scores;  // P(o|I), indexed by object

  bool operator==(const PresenceScores&) const = default;
};

// Throws std::invalid_argument when the distribution is not normalized or
// its length differs from the table's scene count.
PresenceScores predict_presence(const PosteriorTable& table, const SceneDistribution& dist);

// Object indices by descending score, ties by index ascending.
std::vector<std::size_t> rank_objects(const std::vector<double>& scores);

struct PredictionConfig {
  std::optional<double> alpha;  // nullopt: estimate from counts
  SigmaSource sigma;
  std::size_t draws = kDefaultDraws;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// compute_posterior -> smooth -> sample with the configured parameters.
PosteriorTable build_sampled_table(const ContextMatrix& matrix, const PredictionConfig& config);

// `image_id<TAB>object<TAB>score`, sorted by image then descending score.
void save_presence_scores(const std::vector<PresenceScores>& scores, const Vocabulary& vocab,
                          const std::filesystem::path& path,
                          const std::vector<std::string>& header = {});

// Distinct object names in a predictions file, sorted.
std::vector<std::string> load_prediction_object_names(const std::filesystem::path& path);

// Objects absent for an image score 0. Unknown object names are an error.
// Images keep the order in which they first appear.
std::vector<PresenceScores> load_presence_scores(const std::filesystem::path& path,
                                                 const Vocabulary& vocab);

}  // namespace scene2obj

#endif  // SCENE2OBJ_PREDICTION_ENGINE_H_
