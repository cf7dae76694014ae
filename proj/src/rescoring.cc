#include "scene2obj/rescoring.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "scene2obj/tsv.h"

namespace scene2obj {

PresenceIndex index_presence(const std::vector<PresenceScores>& presence) {
  PresenceIndex index;
  for (const auto& p : presence) index.emplace(p.image_id, &p);
  return index;
}

ContextDescriptor build_descriptor(const DetectionRecord& detection,
                                   const PresenceIndex& presence) {
  const auto it = presence.find(detection.image_id);
  if (it == presence.end()) {
    throw std::out_of_range("no presence scores for image '" + detection.image_id + "'");
  }
  ContextDescriptor g;
  g.reserve(1 + it->second->scores.size());
  g.push_back(detection.score);
  g.insert(g.end(), it->second->scores.begin(), it->second->scores.end());
  return g;
}

double iou(const Box& a, const Box& b) {
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

namespace {

// Input indices by descending score; equal scores keep input order.
std::vector<std::size_t> score_order(const std::vector<DetectionRecord>& detections) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });
  return order;
}

}  // namespace

std::vector<bool> match_detections(const std::vector<DetectionRecord>& detections,
                                   const std::vector<GroundTruthBox>& ground_truth,
                                   double iou_threshold) {
  if (!(iou_threshold > 0 && iou_threshold < 1)) {
    throw std::invalid_argument("IoU threshold must lie in (0, 1)");
  }
  std::map<std::pair<std::string_view, std::string_view>, std::vector<std::size_t>> gt_by_key;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    gt_by_key[{ground_truth[g].image_id, ground_truth[g].class_name}].push_back(g);
  }
  std::vector<bool> matched(ground_truth.size(), false);
  std::vector<bool> tp(detections.size(), false);
  for (std::size_t d : score_order(detections)) {
    const auto it = gt_by_key.find({detections[d].image_id, detections[d].class_name});
    if (it == gt_by_key.end()) continue;
    double best = -1;
    std::size_t best_gt = ground_truth.size();
    for (std::size_t g : it->second) {
      if (matched[g]) continue;
      const double overlap = iou(detections[d].box, ground_truth[g].box);
      if (overlap > best) {
        best = overlap;
        best_gt = g;
      }
    }
    if (best_gt < ground_truth.size() && best >= iou_threshold) {
      matched[best_gt] = true;
      tp[d] = true;
    }
  }
  return tp;
}

DetectionApResult detection_ap(const std::vector<DetectionRecord>& detections,
                               const std::vector<GroundTruthBox>& ground_truth,
                               double iou_threshold, ApVariant variant) {
  const std::vector<bool> tp = match_detections(detections, ground_truth, iou_threshold);
  std::map<std::string, std::size_t> gt_count;
  for (const auto& g : ground_truth) ++gt_count[g.class_name];
  std::map<std::string, std::vector<bool>> ranked_hits;
  for (const auto& [name, count] : gt_count) ranked_hits[name];
  for (std::size_t d : score_order(detections)) {
    const auto it = ranked_hits.find(detections[d].class_name);
    if (it != ranked_hits.end()) it->second.push_back(tp[d]);
  }
  DetectionApResult result;
  double sum = 0;
  std::size_t defined = 0;
  for (const auto& [name, hits] : ranked_hits) {
    auto ap = average_precision_ranked(hits, gt_count[name], variant);
    result.ap[name] = ap;
    if (ap) {
      sum += *ap;
      ++defined;
    }
  }
  if (defined > 0) result.map = sum / static_cast<double>(defined);
  return result;
}

double RescorerModel::margin(const ContextDescriptor& g) const {
  if (g.size() != weights.size()) {
    throw std::invalid_argument("descriptor length " + std::to_string(g.size()) +
                                " does not match model length " +
                                std::to_string(weights.size()));
  }
  double m = bias;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = standardize ? (g[i] - feature_mean[i]) / feature_scale[i] : g[i];
    m += weights[i] * x;
  }
  return m;
}

RescorerModel train_rescorer(const std::vector<ContextDescriptor>& descriptors,
                             const std::vector<bool>& labels, const std::string& class_name,
                             const RescorerParams& params) {
  if (descriptors.empty()) throw std::invalid_argument("no training descriptors");
  if (descriptors.size() != labels.size()) {
    throw std::invalid_argument("descriptors and labels differ in length");
  }
  const std::size_t dim = descriptors.front().size();
  RescorerModel model;
  model.class_name = class_name;
  model.standardize = params.standardize;
  model.C = params.C;
  model.tolerance = params.tolerance;

  std::vector<std::vector<double>> features = descriptors;
  if (params.standardize) {
    const double n = static_cast<double>(descriptors.size());
    model.feature_mean.assign(dim, 0.0);
    model.feature_scale.assign(dim, 0.0);
    for (const auto& g : descriptors) {
      if (g.size() != dim) throw std::invalid_argument("ragged descriptors");
      for (std::size_t i = 0; i < dim; ++i) model.feature_mean[i] += g[i];
    }
    for (double& m : model.feature_mean) m /= n;
    for (const auto& g : descriptors) {
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = g[i] - model.feature_mean[i];
        model.feature_scale[i] += d * d;
      }
    }
    // Constant features keep unit scale.
    for (double& s : model.feature_scale) {
      s = std::sqrt(s / n);
      if (!(s > 1e-12)) s = 1.0;
    }
    for (auto& x : features) {
      for (std::size_t i = 0; i < dim; ++i) {
        x[i] = (x[i] - model.feature_mean[i]) / model.feature_scale[i];
      }
    }
  }

  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] ? 1 : -1;
  const LinearSvm svm = train_linear_svm(features, y, {params.C, params.tolerance});
  model.weights = svm.weights;
  model.bias = svm.bias;

  std::vector<double> margins(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) margins[i] = svm.margin(features[i]);
  model.calibration = fit_platt(margins, y);
  return model;
}

RescorerModel train_calibration_only(const std::vector<ContextDescriptor>& descriptors,
                                     const std::vector<bool>& labels,
                                     const std::string& class_name) {
  if (descriptors.empty() || descriptors.size() != labels.size()) {
    throw std::invalid_argument("need one label per descriptor");
  }
  RescorerModel model;
  model.class_name = class_name;
  model.standardize = false;
  model.weights.assign(descriptors.front().size(), 0.0);
  model.weights[0] = 1.0;
  std::vector<double> margins;
  std::vector<int> y;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    margins.push_back(descriptors[i][0]);
    y.push_back(labels[i] ? 1 : -1);
  }
  model.calibration = fit_platt(margins, y);
  return model;
}

TrainingSummary train_rescorers(const std::vector<DetectionRecord>& detections,
                                const std::vector<bool>& labels,
                                const std::vector<PresenceScores>& presence,
                                const RescorerParams& params) {
  if (detections.size() != labels.size()) {
    throw std::invalid_argument("detections and labels differ in length");
  }
  const PresenceIndex index = index_presence(presence);
  std::map<std::string, std::pair<std::vector<ContextDescriptor>, std::vector<bool>>> by_class;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    auto& [g, l] = by_class[detections[i].class_name];
    g.push_back(build_descriptor(detections[i], index));
    l.push_back(labels[i]);
  }
  TrainingSummary summary;
  for (const auto& [name, data] : by_class) {
    const auto& l = data.second;
    const bool any_tp = std::find(l.begin(), l.end(), true) != l.end();
    const bool any_fp = std::find(l.begin(), l.end(), false) != l.end();
    if (!any_tp || !any_fp) {
      summary.skipped_classes.push_back(name);
      continue;
    }
    summary.models.emplace(name, train_rescorer(data.first, l, name, params));
  }
  return summary;
}

RescoreResult rescore(const std::vector<DetectionRecord>& detections, const RescorerSet& models,
                      const std::vector<PresenceScores>& presence) {
  const PresenceIndex index = index_presence(presence);
  RescoreResult result;
  result.detections.reserve(detections.size());
  for (const auto& d : detections) {
    RescoredDetection r{d, d.score, false};
    const auto it = models.find(d.class_name);
    if (it == models.end()) {
      ++result.passed_through;
    } else {
      r.detection.score = it->second.probability(build_descriptor(d, index));
      r.rescored = true;
    }
    result.detections.push_back(std::move(r));
  }
  return result;
}

namespace {

void write_vector(std::ofstream& out, const char* kind, const std::string& name,
                  const std::vector<double>& values) {
  out << kind << '\t' << name;
  for (double v : values) out << '\t' << format_double(v);
  out << '\n';
}

std::vector<double> read_vector(const std::vector<std::string_view>& fields,
                                const tsv::LineReader& reader) {
  std::vector<double> values;
  for (std::size_t i = 2; i < fields.size(); ++i) {
    double v = 0;
    if (!tsv::parse_double(fields[i], v) || !std::isfinite(v)) reader.fail("bad number");
    values.push_back(v);
  }
  return values;
}

}  // namespace

void save_rescorers(const RescorerSet& models, const std::filesystem::path& path,
                    const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  out << "format\tscene2obj-rescorer\t" << RescorerModel::kFormatVersion << '\n';
  for (const auto& [name, m] : models) {
    out << "model\t" << name << '\t' << m.weights.size() << '\t' << (m.standardize ? 1 : 0)
        << '\t' << format_double(m.C) << '\t' << format_double(m.tolerance) << '\t'
        << format_double(m.bias) << '\t' << format_double(m.calibration.a) << '\t'
        << format_double(m.calibration.b) << '\n';
    write_vector(out, "weights", name, m.weights);
    if (m.standardize) {
      write_vector(out, "mean", name, m.feature_mean);
      write_vector(out, "scale", name, m.feature_scale);
    }
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RescorerSet load_rescorers(const std::filesystem::path& path) {
  tsv::LineReader reader(path);
  RescorerSet models;
  bool have_format = false;
  RescorerModel* current = nullptr;
  std::size_t dim = 0;
  std::string line;
  auto check_complete = [&]() {
    if (current == nullptr) return;
    if (current->weights.size() != dim ||
        (current->standardize &&
         (current->feature_mean.size() != dim || current->feature_scale.size() != dim))) {
      reader.fail("incomplete model for class '" + current->class_name + "'");
    }
  };
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (!have_format) {
      std::int64_t version = 0;
      if (f.size() != 3 || f[0] != "format" || f[1] != "scene2obj-rescorer" ||
          !tsv::parse_int(f[2], version)) {
        reader.fail("missing rescorer format line");
      }
      if (version != RescorerModel::kFormatVersion) {
        reader.fail("unsupported rescorer format version " + std::to_string(version));
      }
      have_format = true;
      continue;
    }
    if (f[0] == "model") {
      check_complete();
      if (f.size() != 9) reader.fail("model line needs 9 fields");
      RescorerModel m;
      m.class_name = std::string(f[1]);
      std::int64_t d = 0, standardize = 0;
      if (!tsv::parse_int(f[2], d) || d < 1) reader.fail("bad descriptor length");
      if (!tsv::parse_int(f[3], standardize) || (standardize != 0 && standardize != 1)) {
        reader.fail("standardize flag must be 0 or 1");
      }
      m.standardize = standardize == 1;
      double* slots[] = {&m.C, &m.tolerance, &m.bias, &m.calibration.a, &m.calibration.b};
      for (std::size_t i = 0; i < 5; ++i) {
        if (!tsv::parse_double(f[4 + i], *slots[i]) || !std::isfinite(*slots[i])) {
          reader.fail("bad model parameter");
        }
      }
      dim = static_cast<std::size_t>(d);
      auto [it, inserted] = models.emplace(m.class_name, std::move(m));
      if (!inserted) reader.fail("duplicate model for class '" + std::string(f[1]) + "'");
      current = &it->second;
      continue;
    }
    if (current == nullptr || f.size() < 2 || f[1] != current->class_name) {
      reader.fail("vector line does not follow its model line");
    }
    if (f[0] == "weights") {
      current->weights = read_vector(f, reader);
    } else if (f[0] == "mean") {
      current->feature_mean = read_vector(f, reader);
    } else if (f[0] == "scale") {
      current->feature_scale = read_vector(f, reader);
      for (double s : current->feature_scale) {
        if (!(s > 0)) reader.fail("feature scale must be positive");
      }
    } else {
      reader.fail("unknown line kind '" + std::string(f[0]) + "'");
    }
  }
  if (!have_format) throw ParseError(path.string(), 0, "empty rescorer file");
  check_complete();
  return models;
}

}  // namespace scene2obj
