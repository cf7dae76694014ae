#include "scene2obj/prediction_engine.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "scene2obj/parallel.h"
#include "scene2obj/random.h"
#include "scene2obj/tsv.h"

namespace scene2obj {

namespace {

double population_std(const std::vector<double>& xs) {
  if (xs.empty()) return 0;
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace

std::string_view to_string(TableStage stage) {
  switch (stage) {
    case TableStage::kRaw: return "raw";
    case TableStage::kSmoothed: return "smoothed";
    case TableStage::kSampled: return "sampled";
  }
  return "raw";
}

std::vector<double> PosteriorTable::row(std::size_t scene) const {
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(scene * num_objects);
  return {first, first + static_cast<std::ptrdiff_t>(num_objects)};
}

PosteriorTable compute_posterior(const ContextMatrix& matrix) {
  const std::size_t num_scenes = matrix.num_scenes();
  const std::size_t num_objects = matrix.num_objects();
  const std::int64_t total = matrix.total();
  if (total <= 0) throw std::invalid_argument("context matrix has no counts");

  std::vector<double> column(num_objects, 0.0);
  for (const auto& [key, count] : matrix.entries()) {
    column[key.second] += static_cast<double>(count);
  }

  PosteriorTable table;
  table.num_scenes = num_scenes;
  table.num_objects = num_objects;
  table.values.assign(num_scenes * num_objects, 0.0);
  table.prior.resize(num_objects);
  for (std::size_t o = 0; o < num_objects; ++o) {
    table.prior[o] = column[o] / static_cast<double>(total);
  }
  // P(o|s) = P(s|o) P(o) / P(s) with P(s) = 1/S. Zero columns stay zero.
  const double inv_scene_prior = static_cast<double>(num_scenes);
  for (const auto& [key, count] : matrix.entries()) {
    const auto [s, o] = key;
    const double scene_given_object = static_cast<double>(count) / column[o];
    table.at(s, o) = scene_given_object * table.prior[o] * inv_scene_prior;
  }
  table.stage = TableStage::kRaw;
  return table;
}

double estimate_alpha(const ContextMatrix& matrix) {
  const std::int64_t total = matrix.total();
  if (total <= 0) throw std::invalid_argument("context matrix has no counts");
  std::int64_t singletons = 0;
  for (const auto& [key, count] : matrix.entries()) {
    if (count == 1) ++singletons;
  }
  return static_cast<double>(singletons) / static_cast<double>(total);
}

PosteriorTable smooth(const PosteriorTable& table, double alpha) {
  if (table.stage != TableStage::kRaw) throw std::invalid_argument("smooth expects a raw table");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  PosteriorTable out = table;
  for (std::size_t s = 0; s < table.num_scenes; ++s) {
    for (std::size_t o = 0; o < table.num_objects; ++o) {
      out.at(s, o) = (1.0 - alpha) * table.at(s, o) + alpha * table.prior[o];
    }
  }
  out.alpha = alpha;
  out.stage = TableStage::kSmoothed;
  return out;
}

SigmaSource SigmaSource::parse(std::string_view text) {
  if (text == "prob-std") return {Kind::kProbStd, 0};
  if (text == "count-std-normalized") return {Kind::kCountStdNormalized, 0};
  if (text.rfind("fixed:", 0) == 0) {
    double v = 0;
    if (!tsv::parse_double(text.substr(6), v) || !(v >= 0) || !std::isfinite(v)) {
      throw std::invalid_argument("fixed sigma must be a nonnegative number");
    }
    return {Kind::kFixed, v};
  }
  throw std::invalid_argument("unknown sigma source '" + std::string(text) + "'");
}

double estimate_sigma(const ContextMatrix& matrix, const PosteriorTable& table,
                      const SigmaSource& source) {
  if (table.stage != TableStage::kSmoothed) {
    throw std::invalid_argument("estimate_sigma expects a smoothed table");
  }
  switch (source.kind) {
    case SigmaSource::Kind::kProbStd:
      return population_std(table.values);
    case SigmaSource::Kind::kCountStdNormalized: {
      const std::int64_t total = matrix.total();
      if (total <= 0) throw std::invalid_argument("context matrix has no counts");
      std::vector<double> counts(matrix.num_scenes() * matrix.num_objects(), 0.0);
      for (const auto& [key, count] : matrix.entries()) {
        counts[key.first * matrix.num_objects() + key.second] = static_cast<double>(count);
      }
      return population_std(counts) * static_cast<double>(matrix.num_scenes()) /
             static_cast<double>(total);
    }
    case SigmaSource::Kind::kFixed:
      return source.value;
  }
  return 0;
}

PosteriorTable sample_table(const PosteriorTable& table, double sigma, std::size_t draws,
                            std::uint64_t seed, unsigned threads) {
  if (table.stage != TableStage::kSmoothed) {
    throw std::invalid_argument("sample_table expects a smoothed table");
  }
  if (draws < 1) throw std::invalid_argument("draws must be at least 1");
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be >= 0");
  PosteriorTable out = table;
  out.sigma = sigma;
  out.stage = TableStage::kSampled;
  if (sigma == 0) return out;

  parallel_chunks(table.num_scenes, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      for (std::size_t o = 0; o < table.num_objects; ++o) {
        CounterRng rng(seed, {s, o});
        std::normal_distribution<double> normal(table.at(s, o), sigma);
        double sum = 0;
        for (std::size_t d = 0; d < draws; ++d) sum += std::max(0.0, normal(rng));
        out.at(s, o) = sum / static_cast<double>(draws);
      }
    }
  });
  return out;
}

PresenceScores predict_presence(const PosteriorTable& table, const SceneDistribution& dist) {
  if (dist.probs.size() != table.num_scenes) {
    throw std::invalid_argument("scene distribution for '" + dist.image_id + "' has " +
                                std::to_string(dist.probs.size()) + " entries, table has " +
                                std::to_string(table.num_scenes) + " scenes");
  }
  validate_distribution(dist);
  PresenceScores out{dist.image_id, std::vector<double>(table.num_objects, 0.0)};
  for (std::size_t s = 0; s < table.num_scenes; ++s) {
    const double w = dist.probs[s];
    if (w == 0.0) continue;
    for (std::size_t o = 0; o < table.num_objects; ++o) out.scores[o] += w * table.at(s, o);
  }
  return out;
}

std::vector<std::size_t> rank_objects(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

PosteriorTable build_sampled_table(const ContextMatrix& matrix, const PredictionConfig& config) {
  const PosteriorTable raw = compute_posterior(matrix);
  const double alpha = config.alpha ? *config.alpha : estimate_alpha(matrix);
  const PosteriorTable smoothed = smooth(raw, alpha);
  const double sigma = estimate_sigma(matrix, smoothed, config.sigma);
  return sample_table(smoothed, sigma, config.draws, config.seed, config.threads);
}

void save_presence_scores(const std::vector<PresenceScores>& scores, const Vocabulary& vocab,
                          const std::filesystem::path& path,
                          const std::vector<std::string>& header) {
  std::vector<const PresenceScores*> sorted;
  sorted.reserve(scores.size());
  for (const auto& p : scores) {
    if (p.scores.size() != vocab.num_objects()) {
      throw std::invalid_argument("presence vector size does not match the vocabulary");
    }
    sorted.push_back(&p);
  }
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* a, const auto* b) { return a->image_id < b->image_id; });
  auto out = tsv::open_output(path, header);
  for (const auto* p : sorted) {
    for (std::size_t o : rank_objects(p->scores)) {
      out << p->image_id << '\t' << vocab.objects()[o] << '\t' << format_double(p->scores[o])
          << '\n';
    }
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::string> load_prediction_object_names(const std::filesystem::path& path) {
  std::set<std::string, std::less<>> names;
  tsv::LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() != 3) reader.fail("expected image_id<TAB>object<TAB>score");
    names.emplace(f[1]);
  }
  if (names.empty()) throw ParseError(path.string(), 0, "no predictions");
  return {names.begin(), names.end()};
}

std::vector<PresenceScores> load_presence_scores(const std::filesystem::path& path,
                                                 const Vocabulary& vocab) {
  std::vector<PresenceScores> result;
  std::unordered_map<std::string, std::size_t> index;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  tsv::LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() != 3) reader.fail("expected image_id<TAB>object<TAB>score");
    const auto o = vocab.object_index(f[1]);
    if (!o) reader.fail("unknown object '" + std::string(f[1]) + "'");
    double score = 0;
    if (!tsv::parse_double(f[2], score) || !std::isfinite(score)) reader.fail("bad score");
    auto [it, inserted] = index.emplace(std::string(f[0]), result.size());
    if (inserted) {
      result.push_back({std::string(f[0]), std::vector<double>(vocab.num_objects(), 0.0)});
    }
    if (!seen.insert({it->second, *o}).second) reader.fail("duplicate (image, object) row");
    result[it->second].scores[*o] = score;
  }
  return result;
}

}  // namespace scene2obj
