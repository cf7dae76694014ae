#include "scene2obj/evaluation.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "scene2obj/random.h"
#include "scene2obj/tsv.h"

namespace scene2obj {

ApVariant parse_ap_variant(std::string_view text) {
  if (text == "all") return ApVariant::kAllPoint;
  if (text == "11pt") return ApVariant::kElevenPoint;
  throw std::invalid_argument("unknown AP variant '" + std::string(text) + "'");
}

std::string_view to_string(ApVariant variant) {
  return variant == ApVariant::kAllPoint ? "all" : "11pt";
}

std::optional<double> average_precision_ranked(const std::vector<bool>& hits,
                                               std::size_t num_positives, ApVariant variant) {
  if (num_positives == 0) return std::nullopt;
  if (variant == ApVariant::kAllPoint) {
    // Extended precision so the result is rounded to double once; the
    // worked 5/6 example then comes out exact.
    long double sum = 0;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      if (!hits[i]) continue;
      ++tp;
      sum += static_cast<long double>(tp) / static_cast<long double>(i + 1);
    }
    return static_cast<double>(sum / static_cast<long double>(num_positives));
  }
  // best[j]: max precision over ranks whose recall reaches j/10, computed
  // with integer comparisons (10 * tp >= j * num_positives).
  std::array<long double, 11> best{};
  std::size_t tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]) ++tp;
    const long double precision = static_cast<long double>(tp) / static_cast<long double>(i + 1);
    for (std::size_t j = 0; j <= 10; ++j) {
      if (10 * tp >= j * num_positives) best[j] = std::max(best[j], precision);
    }
  }
  long double sum = 0;
  for (long double b : best) sum += b;
  return static_cast<double>(sum / 11.0L);
}

std::optional<double> average_precision(std::vector<ScoredItem> items, ApVariant variant) {
  std::sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  std::vector<bool> hits(items.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    hits[i] = items[i].positive;
    positives += items[i].positive ? 1 : 0;
  }
  return average_precision_ranked(hits, positives, variant);
}

PresenceTruth presence_truth(const std::vector<ImageAnnotation>& annotations,
                             const Vocabulary& vocab) {
  PresenceTruth truth;
  for (const auto& a : annotations) {
    std::vector<std::size_t> objs;
    std::size_t instances = 0;
    for (const auto& name : a.objects) {
      if (auto o = vocab.object_index(name)) {
        objs.push_back(*o);
        ++instances;
      }
    }
    std::sort(objs.begin(), objs.end());
    objs.erase(std::unique(objs.begin(), objs.end()), objs.end());
    truth.image_ids.push_back(a.image_id);
    truth.objects.push_back(std::move(objs));
    truth.instance_counts.push_back(instances);
  }
  return truth;
}

namespace {

std::unordered_map<std::string_view, const PresenceScores*> index_predictions(
    const std::vector<PresenceScores>& predictions, std::size_t num_objects) {
  std::unordered_map<std::string_view, const PresenceScores*> by_id;
  for (const auto& p : predictions) {
    if (p.scores.size() != num_objects) {
      throw std::invalid_argument("prediction for '" + p.image_id +
                                  "' does not match the vocabulary size");
    }
    by_id.emplace(p.image_id, &p);
  }
  return by_id;
}

}  // namespace

double topk_object_accuracy(const std::vector<PresenceScores>& predictions,
                            const std::vector<ImageAnnotation>& annotations,
                            const Vocabulary& vocab, std::size_t k, bool count_instances) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  const auto by_id = index_predictions(predictions, vocab.num_objects());
  const PresenceTruth truth = presence_truth(annotations, vocab);
  std::size_t correct = 0, eligible = 0;
  for (std::size_t i = 0; i < truth.image_ids.size(); ++i) {
    const std::size_t size = count_instances ? truth.instance_counts[i] : truth.objects[i].size();
    if (size < k) continue;
    const auto it = by_id.find(truth.image_ids[i]);
    if (it == by_id.end()) continue;
    ++eligible;
    const auto order = rank_objects(it->second->scores);
    for (std::size_t r = 0; r < k && r < order.size(); ++r) {
      if (std::binary_search(truth.objects[i].begin(), truth.objects[i].end(), order[r])) {
        ++correct;
      }
    }
  }
  if (eligible == 0) {
    throw std::invalid_argument("no image with at least " + std::to_string(k) +
                                " annotated objects");
  }
  return static_cast<double>(correct) / static_cast<double>(k * eligible);
}

std::vector<std::optional<double>> per_class_ap(const std::vector<PresenceScores>& predictions,
                                                const std::vector<ImageAnnotation>& annotations,
                                                const Vocabulary& vocab, ApVariant variant) {
  const auto by_id = index_predictions(predictions, vocab.num_objects());
  const PresenceTruth truth = presence_truth(annotations, vocab);
  std::vector<std::size_t> rows;
  std::vector<const PresenceScores*> preds;
  for (std::size_t i = 0; i < truth.image_ids.size(); ++i) {
    const auto it = by_id.find(truth.image_ids[i]);
    if (it == by_id.end()) continue;
    rows.push_back(i);
    preds.push_back(it->second);
  }
  std::vector<std::optional<double>> ap(vocab.num_objects());
  std::vector<ScoredItem> items(rows.size());
  for (std::size_t o = 0; o < vocab.num_objects(); ++o) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto& objs = truth.objects[rows[j]];
      items[j] = {truth.image_ids[rows[j]], preds[j]->scores[o],
                  std::binary_search(objs.begin(), objs.end(), o)};
    }
    ap[o] = average_precision(items, variant);
  }
  return ap;
}

std::vector<std::size_t> object_frequencies(const std::vector<ImageAnnotation>& annotations,
                                            const Vocabulary& vocab) {
  std::vector<std::size_t> freq(vocab.num_objects(), 0);
  const PresenceTruth truth = presence_truth(annotations, vocab);
  for (const auto& objs : truth.objects) {
    for (std::size_t o : objs) ++freq[o];
  }
  return freq;
}

std::vector<std::size_t> rank_by_frequency(const std::vector<std::size_t>& frequencies,
                                           const Vocabulary& vocab) {
  std::vector<std::size_t> order(frequencies.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (frequencies[a] != frequencies[b]) return frequencies[a] > frequencies[b];
    return vocab.objects()[a] < vocab.objects()[b];
  });
  return order;
}

std::optional<double> mean_ap(const std::vector<std::optional<double>>& ap,
                              const std::vector<std::size_t>& classes) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t c : classes) {
    if (!ap[c]) continue;
    sum += *ap[c];
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

namespace {

FrequencySetResult map_over_ranked(const std::vector<std::optional<double>>& ap,
                                   const std::vector<std::size_t>& ranked,
                                   const std::vector<std::size_t>& set_sizes) {
  FrequencySetResult result;
  for (std::size_t n : set_sizes) {
    std::size_t take = n;
    if (take > ranked.size()) {
      result.warnings.push_back("set size " + std::to_string(n) + " clamped to " +
                                std::to_string(ranked.size()));
      take = ranked.size();
    }
    result.map_by_size[n] =
        mean_ap(ap, std::vector<std::size_t>(ranked.begin(),
                                             ranked.begin() + static_cast<std::ptrdiff_t>(take)));
  }
  return result;
}

}  // namespace

FrequencySetResult map_over_frequency_sets(const std::vector<std::optional<double>>& ap,
                                           const std::vector<ImageAnnotation>& annotations,
                                           const Vocabulary& vocab,
                                           const std::vector<std::size_t>& set_sizes) {
  return map_over_ranked(ap, rank_by_frequency(object_frequencies(annotations, vocab), vocab),
                         set_sizes);
}

ChanceMode ChanceMode::parse(std::string_view text) {
  if (text == "prevalence") return {Kind::kPrevalence, 0, 0};
  if (text == "analytic") return {Kind::kAnalytic, 0, 0};
  if (text.rfind("empirical:", 0) == 0) {
    const auto parts = tsv::split(text.substr(10), ',');
    std::int64_t seed = 0, trials = 0;
    if (parts.size() != 2 || !tsv::parse_int(parts[0], seed) ||
        !tsv::parse_int(parts[1], trials) || trials < 1 || seed < 0) {
      throw std::invalid_argument("expected empirical:<seed>,<trials>");
    }
    return {Kind::kEmpirical, static_cast<std::uint64_t>(seed),
            static_cast<std::size_t>(trials)};
  }
  throw std::invalid_argument("unknown chance mode '" + std::string(text) + "'");
}

double expected_random_ap(std::size_t n, std::size_t p) {
  if (n == 0 || p == 0) return 0;
  if (n == 1) return 1;
  double harmonic = 0;
  for (std::size_t r = 1; r <= n; ++r) harmonic += 1.0 / static_cast<double>(r);
  const double nd = static_cast<double>(n);
  // A positive at rank r has (p-1)(r-1)/(n-1) other positives above it in
  // expectation; average precision-at-rank over r uniform in 1..n.
  return (harmonic + static_cast<double>(p - 1) / (nd - 1) * (nd - harmonic)) / nd;
}

ChanceResult chance_baseline(const std::vector<ImageAnnotation>& annotations,
                             const Vocabulary& vocab, const ChanceMode& mode) {
  const PresenceTruth truth = presence_truth(annotations, vocab);
  const std::size_t n = truth.image_ids.size();
  const std::vector<std::size_t> freq = object_frequencies(annotations, vocab);
  ChanceResult result;
  result.ap.resize(vocab.num_objects());
  result.std_err.resize(vocab.num_objects());

  if (mode.kind != ChanceMode::Kind::kEmpirical) {
    for (std::size_t o = 0; o < vocab.num_objects(); ++o) {
      if (freq[o] == 0) continue;
      result.ap[o] = mode.kind == ChanceMode::Kind::kPrevalence
                         ? static_cast<double>(freq[o]) / static_cast<double>(n)
                         : expected_random_ap(n, freq[o]);
    }
    return result;
  }

  std::vector<double> sum(vocab.num_objects(), 0.0), sum_sq(vocab.num_objects(), 0.0);
  std::vector<std::size_t> perm(n);
  std::vector<bool> hits(n);
  for (std::size_t t = 0; t < mode.trials; ++t) {
    std::iota(perm.begin(), perm.end(), 0);
    CounterRng rng(mode.seed, {0xc4a9ce, t});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng() % i)]);
    }
    for (std::size_t o = 0; o < vocab.num_objects(); ++o) {
      if (freq[o] == 0) continue;
      for (std::size_t r = 0; r < n; ++r) {
        const auto& objs = truth.objects[perm[r]];
        hits[r] = std::binary_search(objs.begin(), objs.end(), o);
      }
      const double ap = *average_precision_ranked(hits, freq[o], ApVariant::kAllPoint);
      sum[o] += ap;
      sum_sq[o] += ap * ap;
    }
  }
  const double trials = static_cast<double>(mode.trials);
  for (std::size_t o = 0; o < vocab.num_objects(); ++o) {
    if (freq[o] == 0) continue;
    const double mean = sum[o] / trials;
    const double var = mode.trials > 1
                           ? std::max(0.0, (sum_sq[o] - trials * mean * mean) / (trials - 1))
                           : 0.0;
    result.ap[o] = mean;
    result.std_err[o] = std::sqrt(var / trials);
  }
  return result;
}

EvalReport evaluate(const std::vector<PresenceScores>& predictions,
                    const std::vector<ImageAnnotation>& all_annotations, const Vocabulary& vocab,
                    const EvalConfig& config) {
  EvalReport report;
  std::vector<std::size_t> classes;
  if (config.classes) {
    classes = *config.classes;
  } else {
    classes.resize(vocab.num_objects());
    std::iota(classes.begin(), classes.end(), 0);
  }
  for (std::size_t c : classes) {
    if (c >= vocab.num_objects()) throw std::invalid_argument("class index out of range");
  }

  // Chance and frequencies see the same images as the AP.
  std::set<std::string_view> predicted;
  for (const auto& p : predictions) predicted.insert(p.image_id);
  std::vector<ImageAnnotation> annotations;
  for (const auto& a : all_annotations) {
    if (predicted.count(a.image_id) > 0) annotations.push_back(a);
  }

  const auto ap = per_class_ap(predictions, annotations, vocab, config.variant);
  const auto chance = chance_baseline(annotations, vocab, config.chance);
  for (std::size_t c : classes) {
    report.class_names.push_back(vocab.objects()[c]);
    report.ap.push_back(ap[c]);
    report.chance_ap.push_back(chance.ap[c]);
  }
  report.overall_map = mean_ap(ap, classes);
  report.overall_chance_map = mean_ap(chance.ap, classes);

  // Frequency ranking restricted to the evaluated classes.
  const auto freq = object_frequencies(annotations, vocab);
  std::vector<std::size_t> ranked;
  for (std::size_t o : rank_by_frequency(freq, vocab)) {
    if (std::find(classes.begin(), classes.end(), o) != classes.end()) ranked.push_back(o);
  }
  auto sets = map_over_ranked(ap, ranked, config.set_sizes);
  report.map_by_size = std::move(sets.map_by_size);
  report.warnings = std::move(sets.warnings);
  report.chance_map_by_size = map_over_ranked(chance.ap, ranked, config.set_sizes).map_by_size;

  for (std::size_t k : config.k_list) {
    try {
      report.topk_accuracy[k] =
          topk_object_accuracy(predictions, annotations, vocab, k, config.count_instances);
    } catch (const std::invalid_argument&) {
      report.topk_accuracy[k] = std::nullopt;
      report.warnings.push_back("no image eligible for top-" + std::to_string(k));
    }
  }
  return report;
}

namespace {

std::string opt_to_string(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("NA");
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * *v;
  return os.str();
}

}  // namespace

void write_report_tsv(const EvalReport& report, const std::filesystem::path& path,
                      const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  out << "summary\tmAP\t" << opt_to_string(report.overall_map) << '\n';
  out << "summary\tchance_mAP\t" << opt_to_string(report.overall_chance_map) << '\n';
  for (const auto& [k, acc] : report.topk_accuracy) {
    out << "topk_accuracy\t" << k << '\t' << opt_to_string(acc) << '\n';
  }
  for (const auto& [n, m] : report.map_by_size) {
    out << "map_top\t" << n << '\t' << opt_to_string(m) << '\n';
  }
  for (const auto& [n, m] : report.chance_map_by_size) {
    out << "chance_map_top\t" << n << '\t' << opt_to_string(m) << '\n';
  }
  for (std::size_t i = 0; i < report.class_names.size(); ++i) {
    out << "ap\t" << report.class_names[i] << '\t' << opt_to_string(report.ap[i]) << '\n';
  }
  for (std::size_t i = 0; i < report.class_names.size(); ++i) {
    out << "chance_ap\t" << report.class_names[i] << '\t' << opt_to_string(report.chance_ap[i])
        << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream os;
  os << "Objects     mAP [%]   Chance [%]\n";
  for (const auto& [n, m] : report.map_by_size) {
    std::ostringstream label;
    label << "Top " << n;
    const auto chance = report.chance_map_by_size.find(n);
    os << std::left << std::setw(12) << label.str() << std::right << std::setw(7) << percent(m)
       << std::setw(13)
       << percent(chance == report.chance_map_by_size.end() ? std::nullopt : chance->second)
       << '\n';
  }
  os << std::left << std::setw(12) << "All" << std::right << std::setw(7)
     << percent(report.overall_map) << std::setw(13) << percent(report.overall_chance_map)
     << '\n';
  os << "\nk   top-k accuracy [%]\n";
  for (const auto& [k, acc] : report.topk_accuracy) {
    os << std::left << std::setw(4) << k << std::right << std::setw(8) << percent(acc) << '\n';
  }
  return os.str();
}

void write_accuracy_svg(const EvalReport& report, const std::filesystem::path& path) {
  constexpr double kWidth = 480, kHeight = 320, kMargin = 40;
  std::vector<std::pair<std::size_t, double>> points;
  for (const auto& [k, acc] : report.topk_accuracy) {
    if (acc) points.emplace_back(k, *acc);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double x0 = kMargin, y0 = kHeight - kMargin;
  const double w = kWidth - 2 * kMargin, h = kHeight - 2 * kMargin;
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 + w << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y0 - h
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << x0 + w / 2 << "\" y=\"" << kHeight - 8
      << "\" text-anchor=\"middle\" font-size=\"12\">k</text>\n";
  out << "<text x=\"12\" y=\"" << y0 - h / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 12 " << y0 - h / 2
      << ")\" text-anchor=\"middle\">top-k accuracy</text>\n";
  if (!points.empty()) {
    const double kmax = static_cast<double>(points.back().first);
    const double kmin = static_cast<double>(points.front().first);
    const double span = kmax > kmin ? kmax - kmin : 1.0;
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& [k, acc] : points) {
      out << x0 + w * (static_cast<double>(k) - kmin) / span << ',' << y0 - h * acc << ' ';
    }
    out << "\"/>\n";
    for (const auto& [k, acc] : points) {
      const double x = x0 + w * (static_cast<double>(k) - kmin) / span;
      out << "<circle cx=\"" << x << "\" cy=\"" << y0 - h * acc
          << "\" r=\"3\" fill=\"steelblue\"/>\n";
      out << "<text x=\"" << x << "\" y=\"" << y0 + 14
          << "\" text-anchor=\"middle\" font-size=\"10\">" << k << "</text>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace scene2obj
