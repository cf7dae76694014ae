#include "scene2obj/scene_source.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "scene2obj/random.h"
#include "scene2obj/tsv.h"

namespace scene2obj {

void validate_distribution(const SceneDistribution& dist, double tol) {
  double sum = 0;
  for (double p : dist.probs) {
    if (!(p >= 0) || !std::isfinite(p)) {
      throw std::invalid_argument("scene distribution for '" + dist.image_id +
                                  "' has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol) {
    throw std::invalid_argument("scene distribution for '" + dist.image_id +
                                "' sums to " + format_double(sum));
  }
}

SceneSourceResult perfect_source(const std::vector<ImageAnnotation>& annotations,
                                 const Vocabulary& vocab) {
  SceneSourceResult result;
  for (const auto& a : annotations) {
    const auto s = vocab.scene_index(a.scene_label);
    if (!s) {
      ++result.skipped;
      result.skipped_ids.push_back(a.image_id);
      continue;
    }
    SceneDistribution d{a.image_id, std::vector<double>(vocab.num_scenes(), 0.0)};
    d.probs[*s] = 1.0;
    result.distributions.push_back(std::move(d));
  }
  return result;
}

Normalization Normalization::parse(std::string_view text) {
  if (text == "sum") return {Kind::kSum, 1.0};
  if (text == "softmax") return {Kind::kSoftmax, 1.0};
  if (text.rfind("softmax:", 0) == 0) {
    double t = 0;
    if (!tsv::parse_double(text.substr(8), t) || !(t > 0) || !std::isfinite(t)) {
      throw std::invalid_argument("softmax temperature must be a positive number");
    }
    return {Kind::kSoftmax, t};
  }
  throw std::invalid_argument("unknown normalization '" + std::string(text) + "'");
}

SceneSourceResult scores_source(const std::vector<SceneScoreRow>& rows, const Vocabulary& vocab,
                                const Normalization& normalization) {
  SceneSourceResult result;
  for (const auto& row : rows) {
    std::vector<double> mass(vocab.num_scenes(), 0.0);
    std::vector<bool> seen(vocab.num_scenes(), false);
    for (const auto& [name, score] : row.scores) {
      const auto s = vocab.scene_index(name);
      if (!s) {
        ++result.skipped;
        continue;
      }
      mass[*s] += score;
      seen[*s] = true;
    }
    SceneDistribution d{row.image_id, std::vector<double>(vocab.num_scenes(), 0.0)};
    if (normalization.kind == Normalization::Kind::kSum) {
      double total = 0;
      for (double m : mass) {
        if (m < 0) {
          throw std::invalid_argument("negative scene score for '" + row.image_id +
                                      "' under sum normalization");
        }
        total += m;
      }
      if (!(total > 0)) {
        throw std::invalid_argument("no positive scene mass for '" + row.image_id + "'");
      }
      for (std::size_t s = 0; s < mass.size(); ++s) d.probs[s] = mass[s] / total;
    } else {
      // Scenes without a score in the row take logit 0.
      const double peak = *std::max_element(mass.begin(), mass.end());
      double total = 0;
      for (std::size_t s = 0; s < mass.size(); ++s) {
        d.probs[s] = std::exp((mass[s] - peak) / normalization.temperature);
        total += d.probs[s];
      }
      for (double& p : d.probs) p /= total;
    }
    result.distributions.push_back(std::move(d));
  }
  return result;
}

SceneDistribution uniform_distribution(std::string image_id, std::size_t num_scenes) {
  return {std::move(image_id),
          std::vector<double>(num_scenes, 1.0 / static_cast<double>(num_scenes))};
}

SceneSourceResult noisy_source(const std::vector<ImageAnnotation>& annotations,
                               const Vocabulary& vocab, double confidence, std::size_t spread,
                               std::uint64_t seed) {
  if (!(confidence >= 0 && confidence <= 1)) {
    throw std::invalid_argument("confidence must lie in [0, 1]");
  }
  const std::size_t num_scenes = vocab.num_scenes();
  spread = std::min(spread, num_scenes - 1);
  SceneSourceResult result;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    const auto truth = vocab.scene_index(a.scene_label);
    if (!truth) {
      ++result.skipped;
      result.skipped_ids.push_back(a.image_id);
      continue;
    }
    SceneDistribution d{a.image_id, std::vector<double>(num_scenes, 0.0)};
    if (spread == 0) {
      d.probs[*truth] = 1.0;
      result.distributions.push_back(std::move(d));
      continue;
    }
    std::vector<std::size_t> others;
    for (std::size_t s = 0; s < num_scenes; ++s) {
      if (s != *truth) others.push_back(s);
    }
    CounterRng rng(seed, {0x5ce7e, i});
    // Partial Fisher-Yates keeps the draw independent of the stdlib.
    for (std::size_t j = 0; j < spread; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(rng() % (others.size() - j));
      std::swap(others[j], others[pick]);
    }
    d.probs[*truth] = confidence;
    const double rest = (1.0 - confidence) / static_cast<double>(spread);
    for (std::size_t j = 0; j < spread; ++j) d.probs[others[j]] = rest;
    result.distributions.push_back(std::move(d));
  }
  return result;
}

std::vector<std::size_t> rank_scenes(const std::vector<double>& probs) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  return order;
}

double topk_scene_accuracy(const std::vector<SceneDistribution>& distributions,
                           const std::vector<ImageAnnotation>& annotations,
                           const Vocabulary& vocab, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  std::unordered_map<std::string_view, const SceneDistribution*> by_id;
  for (const auto& d : distributions) by_id.emplace(d.image_id, &d);
  std::size_t hits = 0, total = 0;
  for (const auto& a : annotations) {
    const auto it = by_id.find(a.image_id);
    const auto truth = vocab.scene_index(a.scene_label);
    if (it == by_id.end() || !truth) continue;
    ++total;
    const auto order = rank_scenes(it->second->probs);
    const std::size_t limit = std::min(k, order.size());
    if (std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(limit), *truth) !=
        order.begin() + static_cast<std::ptrdiff_t>(limit)) {
      ++hits;
    }
  }
  if (total == 0) throw std::invalid_argument("no annotated image has a scene distribution");
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace scene2obj
