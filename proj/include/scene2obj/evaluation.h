// Presence evaluation: top-k accuracy, average precision, mAP over
// frequency-ranked object sets, and chance baselines.

#ifndef SCENE2OBJ_EVALUATION_H_
#define SCENE2OBJ_EVALUATION_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scene2obj/corpus_io.h"
#include "scene2obj/prediction_engine.h"

namespace scene2obj {

enum class ApVariant { kAllPoint, kElevenPoint };

ApVariant parse_ap_variant(std::string_view text);  // "all" | "11pt"
std::string_view to_string(ApVariant variant);

// AP from hit flags already in rank order, with `num_positives` relevant
// items in total (positives never retrieved count as misses). nullopt when
// num_positives is zero.
//   all-point: sum over hits of precision at that rank / num_positives
//   11-point:  mean over r in {0, 0.1, ..., 1} of max precision at recall >= r
std::optional<double> average_precision_ranked(const std::vector<bool>& hits,
                                               std::size_t num_positives, ApVariant variant);

struct ScoredItem {
  std::string id;
  double score = 0;
  bool positive = false;
};

// Ranks by score descending, ties by id ascending.
std::optional<double> average_precision(std::vector<ScoredItem> items,
                                        ApVariant variant = ApVariant::kAllPoint);

// Canonical object indices present in each annotated image. Images whose
// objects are all unknown still appear (with an empty set).
struct PresenceTruth {
  std::vector<std::string> image_ids;
  std::vector<std::vector<std::size_t>> objects;  // sorted, distinct
  std::vector<std::size_t> instance_counts;       // annotated mentions known to the vocab
};
PresenceTruth presence_truth(const std::vector<ImageAnnotation>& annotations,
                             const Vocabulary& vocab);

// Over images with at least k annotated objects, the share of top-k
// predictions that are annotated in the image. Eligibility counts distinct
// object types unless count_instances is set. Throws std::invalid_argument
// when no image is eligible.
double topk_object_accuracy(const std::vector<PresenceScores>& predictions,
                            const std::vector<ImageAnnotation>& annotations,
                            const Vocabulary& vocab, std::size_t k,
                            bool count_instances = false);

// AP for every object over the annotated images that have predictions.
// Classes without a positive image map to nullopt.
std::vector<std::optional<double>> per_class_ap(const std::vector<PresenceScores>& predictions,
                                                const std::vector<ImageAnnotation>& annotations,
                                                const Vocabulary& vocab,
                                                ApVariant variant = ApVariant::kAllPoint);

// Number of images containing each object.
std::vector<std::size_t> object_frequencies(const std::vector<ImageAnnotation>& annotations,
                                            const Vocabulary& vocab);

// Object indices by frequency descending, ties by name ascending.
std::vector<std::size_t> rank_by_frequency(const std::vector<std::size_t>& frequencies,
                                           const Vocabulary& vocab);

// Mean of the defined APs among `classes`; nullopt if none is defined.
std::optional<double> mean_ap(const std::vector<std::optional<double>>& ap,
                              const std::vector<std::size_t>& classes);

struct FrequencySetResult {
  std::map<std::size_t, std::optional<double>> map_by_size;  // requested size -> mAP
  std::vector<std::string> warnings;
};

// For each n, mAP over the n most frequent objects; n beyond O is clamped.
FrequencySetResult map_over_frequency_sets(const std::vector<std::optional<double>>& ap,
                                           const std::vector<ImageAnnotation>& annotations,
                                           const Vocabulary& vocab,
                                           const std::vector<std::size_t>& set_sizes);

struct ChanceMode {
  enum class Kind {
    kPrevalence,  // fraction of positive images
    kAnalytic,    // exact expected all-point AP of a uniformly random ranking
    kEmpirical,   // Monte-Carlo average over random rankings
  };
  Kind kind = Kind::kAnalytic;
  std::uint64_t seed = 0;
  std::size_t trials = 1000;

  // "prevalence", "analytic", or "empirical:<seed>,<trials>".
  static ChanceMode parse(std::string_view text);
};

// Expected all-point AP of a uniformly random ranking of n items with p
// positives: (H_n + (p - 1)/(n - 1) * (n - H_n)) / n, which tends to p/n.
double expected_random_ap(std::size_t n, std::size_t p);

struct ChanceResult {
  std::vector<std::optional<double>> ap;       // per object
  std::vector<std::optional<double>> std_err;  // empirical mode only
};

ChanceResult chance_baseline(const std::vector<ImageAnnotation>& annotations,
                             const Vocabulary& vocab, const ChanceMode& mode);

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> ap;
  std::vector<std::optional<double>> chance_ap;
  std::map<std::size_t, std::optional<double>> map_by_size;
  std::map<std::size_t, std::optional<double>> chance_map_by_size;
  std::map<std::size_t, std::optional<double>> topk_accuracy;  // nullopt: no eligible image
  std::optional<double> overall_map;
  std::optional<double> overall_chance_map;
  std::vector<std::string> warnings;
};

struct EvalConfig {
  ApVariant variant = ApVariant::kAllPoint;
  std::vector<std::size_t> k_list{1, 2, 3, 4, 5};
  std::vector<std::size_t> set_sizes{20, 40, 60, 80, 100};
  bool count_instances = false;
  ChanceMode chance;
  // Restricts per-class results, overall mAP, and frequency sets to these
  // objects. nullopt: every object in the vocabulary.
  std::optional<std::vector<std::size_t>> classes;
};

// Only annotated images that have predictions take part.
EvalReport evaluate(const std::vector<PresenceScores>& predictions,
                    const std::vector<ImageAnnotation>& annotations, const Vocabulary& vocab,
                    const EvalConfig& config);

// Machine-readable report: one `section<TAB>key<TAB>value` row per number.
void write_report_tsv(const EvalReport& report, const std::filesystem::path& path,
                      const std::vector<std::string>& header = {});
std::string format_report_table(const EvalReport& report);
// Accuracy-vs-k polyline chart.
void write_accuracy_svg(const EvalReport& report, const std::filesystem::path& path);

}  // namespace scene2obj

#endif  // SCENE2OBJ_EVALUATION_H_
