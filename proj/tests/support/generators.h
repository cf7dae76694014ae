// Random instance generators for property tests and the acceptance suite.

#ifndef SCENE2OBJ_TESTS_GENERATORS_H_
#define SCENE2OBJ_TESTS_GENERATORS_H_

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "scene2obj/context_matrix.h"
#include "scene2obj/corpus_io.h"
#include "scene2obj/evaluation.h"
#include "scene2obj/scene_source.h"

namespace scene2obj::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return real(0, 1) < p; }
  std::mt19937_64& engine() { return rng_; }

  // Tags weighted toward the tokens that drive the relation grammar.
  PosTag tag() {
    static const PosTag kTags[] = {PosTag::kVerb, PosTag::kVerb,   PosTag::kParticle,
                                   PosTag::kAdv,  PosTag::kNoun,   PosTag::kNoun,
                                   PosTag::kAdj,  PosTag::kPron,   PosTag::kDet,
                                   PosTag::kPrep, PosTag::kPrep,   PosTag::kInfMarker,
                                   PosTag::kOther};
    return kTags[size(0, std::size(kTags) - 1)];
  }

  Sentence sentence(std::size_t max_len) {
    Sentence s;
    const std::size_t n = size(1, max_len);
    for (std::size_t i = 0; i < n; ++i) {
      const PosTag t = tag();
      s.push_back({"w" + std::to_string(i) + std::string(to_string(t)), t, {}});
    }
    return s;
  }

  std::shared_ptr<const Vocabulary> vocabulary(std::size_t scenes, std::size_t objects) {
    std::vector<std::string> s, o;
    for (std::size_t i = 0; i < scenes; ++i) s.push_back("s" + std::to_string(i));
    for (std::size_t i = 0; i < objects; ++i) o.push_back("o" + std::to_string(i));
    return std::make_shared<Vocabulary>(Vocabulary::build(s, o));
  }

  // Sparse counts with plenty of ones and zeros; never all zero.
  ContextMatrix matrix(std::size_t max_scenes, std::size_t max_objects) {
    auto vocab = vocabulary(size(1, max_scenes), size(1, max_objects));
    ContextMatrix m(vocab);
    const double density = real(0.05, 0.9);
    for (std::size_t s = 0; s < m.num_scenes(); ++s) {
      for (std::size_t o = 0; o < m.num_objects(); ++o) {
        if (!coin(density)) continue;
        m.set(s, o, coin(0.4) ? 1 : static_cast<std::int64_t>(size(1, 50)));
      }
    }
    if (m.total() == 0) m.set(size(0, m.num_scenes() - 1), size(0, m.num_objects() - 1), 1);
    return m;
  }

  SceneDistribution distribution(std::size_t scenes) {
    SceneDistribution d{"img", std::vector<double>(scenes)};
    double total = 0;
    for (double& p : d.probs) {
      p = coin(0.3) ? 0.0 : real(0, 1);
      total += p;
    }
    if (total == 0) {
      d.probs[size(0, scenes - 1)] = 1.0;
      return d;
    }
    for (double& p : d.probs) p /= total;
    return d;
  }

  std::vector<ScoredItem> scored_items(std::size_t max_n, bool allow_ties) {
    std::vector<ScoredItem> items;
    const std::size_t n = size(1, max_n);
    for (std::size_t i = 0; i < n; ++i) {
      const double score = allow_ties ? static_cast<double>(size(0, 5)) : real(0, 1);
      items.push_back({"i" + std::to_string(1000 + i), score, coin(0.4)});
    }
    items[size(0, n - 1)].positive = true;
    return items;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace scene2obj::testing

#endif  // SCENE2OBJ_TESTS_GENERATORS_H_
