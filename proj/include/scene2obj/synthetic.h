// Seeded synthetic worlds: scenes with known object-presence profiles,
// annotated images sampled from them, a POS-tagged text corpus whose
// scene-object relation frequencies follow the same profiles, and a
// detection set for rescoring experiments.

#ifndef SCENE2OBJ_SYNTHETIC_H_
#define SCENE2OBJ_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scene2obj/corpus_io.h"
#include "scene2obj/prediction_engine.h"

namespace scene2obj {

struct WorldConfig {
  std::size_t num_scenes = 20;
  std::size_t num_objects = 100;
  std::size_t num_images = 500;
  std::size_t typical_objects = 12;  // per scene
  double typical_low = 0.3;          // presence probability range of typical objects
  double typical_high = 0.9;
  double background = 0.03;          // mean presence probability of the rest
  // Scenes 2k and 2k+1 share one presence profile.
  bool confusable_pairs = false;
  // Expected relation sentences for a pair with presence probability 1.
  double sentences_per_unit = 40.0;
  double text_noise = 0.8;  // log-normal spread of relation frequencies
  // Sentences per scene pairing it with a uniformly drawn object.
  std::size_t distractors_per_scene = 10;
  // Object-object sentences, which carry no scene relation.
  std::size_t object_sentences = 500;
  std::uint64_t seed = 0;
};

struct SyntheticWorld {
  std::vector<std::string> scenes;
  std::vector<std::string> objects;
  LemmaMap lemma_map;                          // plural surface forms
  std::vector<std::vector<double>> presence;   // [scene][object]
  std::vector<ImageAnnotation> images;
  Corpus corpus;
};

SyntheticWorld generate_world(const WorldConfig& config);

struct DetectionConfig {
  std::size_t num_images = 200;
  std::size_t num_classes = 10;
  double presence_rate = 0.4;   // chance a class appears in an image
  double false_rate = 0.6;      // chance of a false detection where it does not
  // Detector scores: true detections U[tp_low, 1], false ones U[0, fp_high].
  double tp_low = 0.2;
  double fp_high = 0.8;
  std::uint64_t seed = 0;
};

// True detections overlap their ground-truth box with IoU above 0.5; false
// ones sit in images without that class. The presence vector is high exactly
// for the classes an image holds, so context separates the two perfectly.
struct DetectionSet {
  std::vector<std::string> classes;
  std::vector<DetectionRecord> detections;
  std::vector<GroundTruthBox> ground_truth;
  std::vector<PresenceScores> presence;  // scores indexed like `classes`
};

DetectionSet generate_detection_set(const DetectionConfig& config);

}  // namespace scene2obj

#endif  // SCENE2OBJ_SYNTHETIC_H_
