#include "scene2obj/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

#include "scene2obj/random.h"

namespace scene2obj {

namespace {

// Stream tags keep the draws of each generation stage independent.
constexpr std::uint64_t kProfileStream = 0x9f0f11e;
constexpr std::uint64_t kImageStream = 0x1a6e;
constexpr std::uint64_t kTextStream = 0x7e47;
constexpr std::uint64_t kDistractorStream = 0xd157;
constexpr std::uint64_t kObjectTextStream = 0x0b7e;
constexpr std::uint64_t kDetectionStream = 0xde7e;

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

std::size_t below(CounterRng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n;
}

TaggedToken tok(std::string surface, PosTag pos) { return {std::move(surface), pos, {}}; }

// Three phrasings of a scene-object relation; the third uses the plural.
Sentence relation_sentence(const std::string& scene, const std::string& object,
                           std::size_t form) {
  switch (form % 3) {
    case 0:
      return {tok("the", PosTag::kDet), tok(object, PosTag::kNoun), tok("was", PosTag::kVerb),
              tok("in", PosTag::kPrep), tok("the", PosTag::kDet), tok(scene, PosTag::kNoun)};
    case 1:
      return {tok("a", PosTag::kDet), tok(scene, PosTag::kNoun), tok("has", PosTag::kVerb),
              tok("a", PosTag::kDet), tok(object, PosTag::kNoun)};
    default:
      return {tok(object + "s", PosTag::kNoun), tok("stood", PosTag::kVerb),
              tok("near", PosTag::kPrep), tok("the", PosTag::kDet), tok("old", PosTag::kAdj),
              tok(scene, PosTag::kNoun)};
  }
}

Box random_box(CounterRng& rng) {
  const double x1 = rng.uniform() * 400, y1 = rng.uniform() * 300;
  const double w = 40 + rng.uniform() * 160, h = 40 + rng.uniform() * 160;
  return {x1, y1, x1 + w, y1 + h};
}

}  // namespace

SyntheticWorld generate_world(const WorldConfig& config) {
  const std::size_t S = config.num_scenes, O = config.num_objects;
  if (S == 0 || O == 0) throw std::invalid_argument("world needs scenes and objects");
  if (config.typical_objects > O) throw std::invalid_argument("more typical objects than objects");

  SyntheticWorld world;
  for (std::size_t s = 0; s < S; ++s) world.scenes.push_back(numbered("scene", s, 2));
  for (std::size_t o = 0; o < O; ++o) {
    world.objects.push_back(numbered("object", o, 3));
    world.lemma_map.emplace(world.objects.back() + "s", world.objects.back());
  }

  world.presence.assign(S, std::vector<double>(O, 0.0));
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t profile = config.confusable_pairs ? s / 2 : s;
    CounterRng rng(config.seed, {kProfileStream, profile});
    std::vector<std::size_t> order(O);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < O; ++i) {
      std::swap(order[i], order[i + below(rng, O - i)]);
    }
    for (std::size_t i = 0; i < O; ++i) {
      const double u = rng.uniform();
      world.presence[s][order[i]] =
          i < config.typical_objects
              ? config.typical_low + (config.typical_high - config.typical_low) * u
              : config.background * (0.5 + u);
    }
  }

  for (std::size_t i = 0; i < config.num_images; ++i) {
    CounterRng rng(config.seed, {kImageStream, i});
    const std::size_t s = below(rng, S);
    ImageAnnotation image{numbered("img", i, 4), world.scenes[s], {}};
    std::size_t best = 0;
    for (std::size_t o = 0; o < O; ++o) {
      if (world.presence[s][o] > world.presence[s][best]) best = o;
      if (rng.uniform() < world.presence[s][o]) {
        image.objects.push_back(world.objects[o]);
        if (rng.uniform() < 0.3) image.objects.push_back(world.objects[o]);
      }
    }
    if (image.objects.empty()) image.objects.push_back(world.objects[best]);
    world.images.push_back(std::move(image));
  }

  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t o = 0; o < O; ++o) {
      CounterRng rng(config.seed, {kTextStream, s, o});
      std::normal_distribution<double> noise(0.0, config.text_noise);
      const double factor = std::exp(noise(rng) - config.text_noise * config.text_noise / 2);
      const double mean = config.sentences_per_unit * world.presence[s][o] * factor;
      if (!(mean > 0)) continue;
      const auto n = std::poisson_distribution<long>(mean)(rng);
      for (long k = 0; k < n; ++k) {
        world.corpus.push_back(relation_sentence(world.scenes[s], world.objects[o], below(rng, 3)));
      }
    }
    CounterRng rng(config.seed, {kDistractorStream, s});
    for (std::size_t k = 0; k < config.distractors_per_scene; ++k) {
      const std::size_t o = below(rng, O);
      world.corpus.push_back(relation_sentence(world.scenes[s], world.objects[o], below(rng, 3)));
    }
  }

  CounterRng rng(config.seed, {kObjectTextStream});
  for (std::size_t k = 0; k < config.object_sentences; ++k) {
    const std::size_t a = below(rng, O), b = below(rng, O);
    world.corpus.push_back({tok("the", PosTag::kDet), tok(world.objects[a], PosTag::kNoun),
                            tok("sat", PosTag::kVerb), tok("on", PosTag::kPrep),
                            tok("the", PosTag::kDet), tok(world.objects[b], PosTag::kNoun)});
  }
  return world;
}

DetectionSet generate_detection_set(const DetectionConfig& config) {
  if (config.num_classes == 0) throw std::invalid_argument("detection set needs classes");
  DetectionSet set;
  for (std::size_t c = 0; c < config.num_classes; ++c) set.classes.push_back(numbered("class", c, 2));

  for (std::size_t i = 0; i < config.num_images; ++i) {
    CounterRng rng(config.seed, {kDetectionStream, i});
    const std::string image_id = numbered("det", i, 4);
    PresenceScores presence{image_id, std::vector<double>(config.num_classes)};
    for (std::size_t c = 0; c < config.num_classes; ++c) {
      const std::string& name = set.classes[c];
      if (rng.uniform() < config.presence_rate) {
        presence.scores[c] = 0.55 + 0.45 * rng.uniform();
        const Box gt = random_box(rng);
        set.ground_truth.push_back({image_id, name, gt});
        // Shifting by at most 5% of the side keeps IoU above 0.8.
        const double dx = (rng.uniform() - 0.5) * 0.1 * (gt.x2 - gt.x1);
        const double dy = (rng.uniform() - 0.5) * 0.1 * (gt.y2 - gt.y1);
        const double score = config.tp_low + (1 - config.tp_low) * rng.uniform();
        set.detections.push_back(
            {image_id, name, score, {gt.x1 + dx, gt.y1 + dy, gt.x2 + dx, gt.y2 + dy}, true});
      } else {
        presence.scores[c] = 0.45 * rng.uniform();
        if (rng.uniform() < config.false_rate) {
          const double score = config.fp_high * rng.uniform();
          set.detections.push_back({image_id, name, score, random_box(rng), false});
        }
      }
    }
    set.presence.push_back(std::move(presence));
  }
  return set;
}

}  // namespace scene2obj
