// Detection rescoring with scene context.
//
// Each detection is described by (detector score, P(o_1|I), ..., P(o_n|I)),
// i.e. its own score followed by the presence vector of its image. A linear
// SVM per class separates true from false positives on that descriptor and
// a sigmoid maps its margin to a probability that replaces the score.

#ifndef SCENE2OBJ_RESCORING_H_
#define SCENE2OBJ_RESCORING_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "scene2obj/corpus_io.h"
#include "scene2obj/evaluation.h"
#include "scene2obj/linear_svm.h"
#include "scene2obj/prediction_engine.h"

namespace scene2obj {

using ContextDescriptor = std::vector<double>;
using PresenceIndex = std::unordered_map<std::string, const PresenceScores*>;

PresenceIndex index_presence(const std::vector<PresenceScores>& presence);

// Throws std::out_of_range when the image has no presence vector.
ContextDescriptor build_descriptor(const DetectionRecord& detection,
                                   const PresenceIndex& presence);

// Intersection over union with (x2 - x1) * (y2 - y1) areas.
double iou(const Box& a, const Box& b);

// Greedy VOC matching per (image, class): detections in descending score
// order (ties keep input order) claim the best-overlapping unmatched
// ground-truth box with IoU >= threshold. Returns one TP flag per input
// detection.
std::vector<bool> match_detections(const std::vector<DetectionRecord>& detections,
                                   const std::vector<GroundTruthBox>& ground_truth,
                                   double iou_threshold = 0.5);

struct DetectionApResult {
  std::map<std::string, std::optional<double>> ap;  // per class
  std::optional<double> map;
};

// Classes come from the ground truth; a class with detections but no
// ground-truth box has undefined AP.
DetectionApResult detection_ap(const std::vector<DetectionRecord>& detections,
                               const std::vector<GroundTruthBox>& ground_truth,
                               double iou_threshold = 0.5,
                               ApVariant variant = ApVariant::kAllPoint);

struct RescorerModel {
  static constexpr int kFormatVersion = 1;

  std::string class_name;
  bool standardize = true;
  std::vector<double> feature_mean;   // empty when not standardized
  std::vector<double> feature_scale;
  std::vector<double> weights;
  double bias = 0;
  PlattCalibration calibration;
  double C = 1.0;
  double tolerance = 0.01;

  std::size_t descriptor_length() const { return weights.size(); }
  double margin(const ContextDescriptor& g) const;
  double probability(const ContextDescriptor& g) const { return calibration(margin(g)); }
};

struct RescorerParams {
  double C = 1.0;
  double tolerance = 0.01;
  bool standardize = true;
};

// Labels: true for TP. Throws std::invalid_argument when only one label
// occurs.
RescorerModel train_rescorer(const std::vector<ContextDescriptor>& descriptors,
                             const std::vector<bool>& labels, const std::string& class_name,
                             const RescorerParams& params = {});

// Unit weight on the detector score, zero elsewhere, with a Platt fit on
// the raw scores. Rescoring with it is a strictly monotone map per class.
RescorerModel train_calibration_only(const std::vector<ContextDescriptor>& descriptors,
                                     const std::vector<bool>& labels,
                                     const std::string& class_name);

using RescorerSet = std::map<std::string, RescorerModel>;

struct TrainingSummary {
  RescorerSet models;
  std::vector<std::string> skipped_classes;  // single-label training sets
};

// Trains one model per class found in `detections`. labels[i] belongs to
// detections[i].
TrainingSummary train_rescorers(const std::vector<DetectionRecord>& detections,
                                const std::vector<bool>& labels,
                                const std::vector<PresenceScores>& presence,
                                const RescorerParams& params = {});

struct RescoredDetection {
  DetectionRecord detection;  // score replaced
  double original_score = 0;
  bool rescored = false;
};

struct RescoreResult {
  std::vector<RescoredDetection> detections;
  std::size_t passed_through = 0;  // classes without a model
};

RescoreResult rescore(const std::vector<DetectionRecord>& detections, const RescorerSet& models,
                      const std::vector<PresenceScores>& presence);

void save_rescorers(const RescorerSet& models, const std::filesystem::path& path,
                    const std::vector<std::string>& header = {});
RescorerSet load_rescorers(const std::filesystem::path& path);

}  // namespace scene2obj

#endif  // SCENE2OBJ_RESCORING_H_
