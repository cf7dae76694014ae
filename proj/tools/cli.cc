#include "cli.h"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include "scene2obj/context_matrix.h"
#include "scene2obj/corpus_io.h"
#include "scene2obj/evaluation.h"
#include "scene2obj/parallel.h"
#include "scene2obj/prediction_engine.h"
#include "scene2obj/random.h"
#include "scene2obj/relation_extractor.h"
#include "scene2obj/rescoring.h"
#include "scene2obj/scene_source.h"
#include "scene2obj/synthetic.h"
#include "scene2obj/tsv.h"

#ifndef SCENE2OBJ_VERSION
#define SCENE2OBJ_VERSION "0.0.0"
#endif

namespace scene2obj::cli {

namespace {

namespace fs = std::filesystem;

// Invalid flag combinations found after parsing; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<std::string> header;
  std::ostream* out = nullptr;
};

std::shared_ptr<spdlog::logger> logger() { return spdlog::get("scene2obj"); }

// Vocabulary over object names only, for files that carry no scenes.
std::shared_ptr<const Vocabulary> object_vocabulary(const std::vector<std::string>& objects) {
  return std::make_shared<Vocabulary>(Vocabulary::build({"-"}, objects));
}

std::shared_ptr<const Vocabulary> vocabulary_from_files(const std::string& scenes,
                                                        const std::string& objects,
                                                        const std::string& lemma_map) {
  auto vocab = std::make_shared<Vocabulary>(load_vocabulary(
      scenes, objects,
      lemma_map.empty() ? std::nullopt : std::optional<fs::path>(lemma_map)));
  for (const auto& w : vocab->warnings()) logger()->warn("{}", w);
  return vocab;
}

std::vector<std::string> annotation_scenes(const std::vector<ImageAnnotation>& annotations) {
  std::set<std::string> names;
  for (const auto& a : annotations) names.insert(a.scene_label);
  if (names.empty()) throw std::invalid_argument("annotations are empty");
  return {names.begin(), names.end()};
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  std::string corpus, lemma_map, relation_dict, pos_map, out;
};

std::size_t cmd_extract(const ExtractArgs& a, const Context& ctx) {
  const PosMap pos_map = a.pos_map.empty() ? default_pos_map() : load_pos_map(a.pos_map);
  const Corpus corpus = load_tagged_corpus(a.corpus, pos_map);
  ExtractConfig config;
  if (!a.lemma_map.empty()) config.lemma_map = load_lemma_map(a.lemma_map);
  if (!a.relation_dict.empty()) config.relation_dictionary = load_relation_dictionary(a.relation_dict);
  config.threads = ctx.threads;
  const auto triples = extract_corpus(corpus, config);
  const auto records = to_records(triples);
  save_triples(records, a.out, ctx.header);
  logger()->info("extract: {} sentences, {} triples, {} distinct", corpus.size(), triples.size(),
                 records.size());
  return triples.size();
}

// ----------------------------------------------------------- build-matrix

struct BuildMatrixArgs {
  std::string triples, scenes, objects, lemma_map, self_similarity = "on", out;
};

void cmd_build_matrix(const BuildMatrixArgs& a, const Context& ctx) {
  const auto vocab = vocabulary_from_files(a.scenes, a.objects, a.lemma_map);
  ContextMatrix matrix = count_relations(load_triples(a.triples), vocab, ctx.threads);
  if (a.self_similarity == "on") matrix = apply_self_similarity(std::move(matrix));
  save_matrix(matrix, a.out, ctx.header);
  logger()->info("build-matrix: {} nonzero entries, total {}", matrix.entries().size(),
                 matrix.total());
}

// -------------------------------------------------------------- gt-matrix

struct GtMatrixArgs {
  std::string annotations, scenes, objects, lemma_map, out;
};

void cmd_gt_matrix(const GtMatrixArgs& a, const Context& ctx) {
  const auto vocab = vocabulary_from_files(a.scenes, a.objects, a.lemma_map);
  const auto result = matrix_from_annotations(load_annotations(a.annotations), vocab);
  if (result.skipped_images > 0) {
    logger()->warn("gt-matrix: {} images with unknown scene labels skipped", result.skipped_images);
  }
  if (result.unknown_objects > 0) {
    logger()->warn("gt-matrix: {} unknown object mentions ignored", result.unknown_objects);
  }
  save_matrix(result.matrix, a.out, ctx.header);
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string matrix, scenes, objects, lemma_map;
  std::string scene_scores, annotations;
  bool perfect_scene = false;
  std::string normalization = "sum";
  std::string alpha = "auto", sigma = "auto", sigma_source = "prob-std";
  std::size_t draws = kDefaultDraws;
  std::string out;
};

void validate(const PredictArgs& a) {
  if (a.scene_scores.empty() == a.annotations.empty()) {
    throw UsageError("predict needs exactly one of --scene-scores and --annotations");
  }
  if (!a.annotations.empty() && !a.perfect_scene) {
    throw UsageError("--annotations requires --perfect-scene");
  }
  if (a.perfect_scene && a.annotations.empty()) {
    throw UsageError("--perfect-scene requires --annotations");
  }
  if (a.scenes.empty() != a.objects.empty()) {
    throw UsageError("--scenes and --objects go together");
  }
  if (!a.lemma_map.empty() && a.scenes.empty()) {
    throw UsageError("--lemma-map requires --scenes and --objects");
  }
}

PredictionConfig prediction_config(const PredictArgs& a, const Context& ctx) {
  PredictionConfig config;
  if (a.alpha != "auto") {
    double v = 0;
    if (!tsv::parse_double(a.alpha, v) || !(v >= 0 && v <= 1)) {
      throw UsageError("--alpha must be 'auto' or a number in [0, 1]");
    }
    config.alpha = v;
  }
  if (a.sigma == "auto") {
    config.sigma = SigmaSource::parse(a.sigma_source);
  } else {
    double v = 0;
    if (!tsv::parse_double(a.sigma, v) || !(v >= 0) || !std::isfinite(v)) {
      throw UsageError("--sigma must be 'auto' or a nonnegative number");
    }
    config.sigma = {SigmaSource::Kind::kFixed, v};
  }
  if (a.draws == 0) throw UsageError("--draws must be positive");
  config.draws = a.draws;
  config.seed = ctx.seed;
  config.threads = ctx.threads;
  return config;
}

void cmd_predict(const PredictArgs& a, const Context& ctx) {
  validate(a);
  const PredictionConfig config = prediction_config(a, ctx);
  const auto vocab = a.scenes.empty()
                         ? std::make_shared<Vocabulary>(vocabulary_from_matrix_file(a.matrix))
                         : vocabulary_from_files(a.scenes, a.objects, a.lemma_map);
  const ContextMatrix matrix = load_matrix(a.matrix, vocab);

  SceneSourceResult source;
  if (!a.scene_scores.empty()) {
    const Normalization norm = Normalization::parse(a.normalization);
    source = scores_source(load_scene_scores(a.scene_scores, norm.kind == Normalization::Kind::kSoftmax),
                           *vocab, norm);
  } else {
    source = perfect_source(load_annotations(a.annotations), *vocab);
  }
  if (source.skipped > 0) {
    logger()->warn("predict: {} images or scores could not be mapped to the vocabulary",
                   source.skipped);
  }

  const PosteriorTable table = build_sampled_table(matrix, config);
  logger()->info("predict: alpha={} sigma={} draws={}", table.alpha, table.sigma, config.draws);
  std::vector<PresenceScores> scores(source.distributions.size());
  parallel_chunks(scores.size(), ctx.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      scores[i] = predict_presence(table, source.distributions[i]);
    }
  });
  save_presence_scores(scores, *vocab, a.out, ctx.header);
}

// ------------------------------------------------------------- scene-eval

struct SceneEvalArgs {
  std::string scene_scores, annotations, scenes, lemma_map;
  std::string normalization = "sum";
  std::vector<std::size_t> k{1, 3, 5};
  std::string out;
};

std::map<std::size_t, double> cmd_scene_eval(const SceneEvalArgs& a, const Context& ctx) {
  const Normalization norm = Normalization::parse(a.normalization);
  const auto annotations = load_annotations(a.annotations);
  const auto rows = load_scene_scores(a.scene_scores, norm.kind == Normalization::Kind::kSoftmax);
  std::vector<std::string> scenes;
  if (!a.scenes.empty()) {
    scenes = load_name_list(a.scenes);
  } else {
    std::set<std::string> names;
    for (const auto& a : annotations) names.insert(a.scene_label);
    for (const auto& r : rows) {
      for (const auto& [name, score] : r.scores) names.insert(name);
    }
    scenes.assign(names.begin(), names.end());
  }
  if (scenes.empty()) throw std::invalid_argument("no scene names found");
  Vocabulary vocab = Vocabulary::build(
      scenes, {"-"}, a.lemma_map.empty() ? LemmaMap{} : load_lemma_map(a.lemma_map));
  const auto source = scores_source(rows, vocab, norm);

  std::map<std::size_t, double> accuracy;
  for (std::size_t k : a.k) {
    if (k == 0) throw UsageError("--k values must be positive");
    accuracy[k] = topk_scene_accuracy(source.distributions, annotations, vocab, k);
  }
  *ctx.out << "k   scene accuracy [%]\n";
  for (const auto& [k, acc] : accuracy) {
    *ctx.out << std::left << std::setw(4) << k << std::right << std::fixed << std::setprecision(1)
             << std::setw(8) << 100.0 * acc << '\n';
  }
  *ctx.out << std::defaultfloat;
  if (!a.out.empty()) {
    auto file = tsv::open_output(a.out, ctx.header);
    for (const auto& [k, acc] : accuracy) {
      file << "scene_topk_accuracy\t" << k << '\t' << format_double(acc) << '\n';
    }
    if (!file.flush()) throw std::runtime_error("write failed: " + a.out);
  }
  return accuracy;
}

// --------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string predictions, annotations, objects, lemma_map, classes;
  std::string ap_variant = "all";
  std::vector<std::size_t> k_list{1, 2, 3, 4, 5};
  std::vector<std::size_t> set_sizes{20, 40, 60, 80, 100};
  bool count_instances = false;
  std::string chance = "analytic";
  std::string out, plot;
  bool quiet = false;
};

EvalReport cmd_evaluate(const EvaluateArgs& a, const Context& ctx) {
  const auto annotations = load_annotations(a.annotations);
  const std::vector<std::string> objects =
      a.objects.empty() ? load_prediction_object_names(a.predictions) : load_name_list(a.objects);
  const Vocabulary vocab = Vocabulary::build(
      annotation_scenes(annotations), objects,
      a.lemma_map.empty() ? LemmaMap{} : load_lemma_map(a.lemma_map));
  const auto predictions = load_presence_scores(a.predictions, vocab);

  EvalConfig config;
  config.variant = parse_ap_variant(a.ap_variant);
  config.k_list = a.k_list;
  config.set_sizes = a.set_sizes;
  config.count_instances = a.count_instances;
  config.chance = ChanceMode::parse(a.chance);
  if (!a.classes.empty()) {
    std::vector<std::size_t> classes;
    if (a.classes.rfind("top", 0) == 0 && !fs::exists(a.classes)) {
      std::int64_t n = 0;
      if (!tsv::parse_int(std::string_view(a.classes).substr(3), n) || n <= 0) {
        throw UsageError("--classes must be a file or top<N>");
      }
      const auto ranked = rank_by_frequency(object_frequencies(annotations, vocab), vocab);
      classes.assign(ranked.begin(),
                     ranked.begin() + std::min<std::size_t>(static_cast<std::size_t>(n), ranked.size()));
      std::sort(classes.begin(), classes.end());
    } else {
      for (const auto& name : load_name_list(a.classes)) {
        const auto index = vocab.object_index(name);
        if (!index) throw std::invalid_argument("class '" + name + "' has no predictions");
        classes.push_back(*index);
      }
    }
    config.classes = std::move(classes);
  }

  EvalReport report = evaluate(predictions, annotations, vocab, config);
  for (const auto& w : report.warnings) logger()->warn("evaluate: {}", w);
  if (!a.quiet) *ctx.out << format_report_table(report);
  if (!a.out.empty()) write_report_tsv(report, a.out, ctx.header);
  if (!a.plot.empty()) write_accuracy_svg(report, a.plot);
  return report;
}

// ---------------------------------------------------------- rescore-train

std::vector<PresenceScores> load_presence_for_rescoring(const std::string& path) {
  return load_presence_scores(path, *object_vocabulary(load_prediction_object_names(path)));
}

struct RescoreTrainArgs {
  std::string detections, gt, predictions;
  double C = 1.0, tol = 0.01;
  std::string standardize = "on";
  bool calibration_only = false;
  std::string out;
};

void cmd_rescore_train(const RescoreTrainArgs& a, const Context& ctx) {
  if (!(a.C > 0)) throw UsageError("--C must be positive");
  if (!(a.tol > 0)) throw UsageError("--tol must be positive");
  const auto detections = load_detections(a.detections);
  std::vector<bool> labels;
  if (!a.gt.empty()) {
    labels = match_detections(detections, load_ground_truth_boxes(a.gt));
  } else {
    for (const auto& d : detections) {
      if (!d.tp_label) {
        throw std::invalid_argument("detection without tp/fp label; pass --gt to compute labels");
      }
      labels.push_back(*d.tp_label);
    }
  }
  const auto presence = load_presence_for_rescoring(a.predictions);

  RescorerSet models;
  std::vector<std::string> skipped;
  if (a.calibration_only) {
    const PresenceIndex index = index_presence(presence);
    std::map<std::string, std::pair<std::vector<ContextDescriptor>, std::vector<bool>>> by_class;
    for (std::size_t i = 0; i < detections.size(); ++i) {
      auto& [g, l] = by_class[detections[i].class_name];
      g.push_back(build_descriptor(detections[i], index));
      l.push_back(labels[i]);
    }
    for (const auto& [name, data] : by_class) {
      const auto& l = data.second;
      if (std::count(l.begin(), l.end(), true) == 0 || std::count(l.begin(), l.end(), false) == 0) {
        skipped.push_back(name);
        continue;
      }
      models.emplace(name, train_calibration_only(data.first, l, name));
    }
  } else {
    RescorerParams params{a.C, a.tol, a.standardize == "on"};
    auto summary = train_rescorers(detections, labels, presence, params);
    models = std::move(summary.models);
    skipped = std::move(summary.skipped_classes);
  }
  for (const auto& name : skipped) {
    logger()->warn("rescore-train: class '{}' has only one label; no model", name);
  }
  save_rescorers(models, a.out, ctx.header);
  logger()->info("rescore-train: {} models", models.size());
}

// ---------------------------------------------------------------- rescore

struct RescoreArgs {
  std::string detections, model, predictions, gt, out;
  std::string ap_variant = "all";
  bool quiet = false;
};

struct RescoreSummary {
  std::optional<double> raw_map, rescored_map;
};

RescoreSummary cmd_rescore(const RescoreArgs& a, const Context& ctx) {
  const auto detections = load_detections(a.detections);
  const RescorerSet models = load_rescorers(a.model);
  const auto presence = load_presence_for_rescoring(a.predictions);
  const RescoreResult result = rescore(detections, models, presence);
  if (result.passed_through > 0) {
    logger()->warn("rescore: {} detections of classes without a model passed through",
                   result.passed_through);
  }

  auto out = tsv::open_output(a.out, ctx.header);
  out << "# image_id\tclass\tscore\tx1,y1,x2,y2\toriginal_score\n";
  for (const auto& r : result.detections) {
    const auto& d = r.detection;
    out << d.image_id << '\t' << d.class_name << '\t' << format_double(d.score) << '\t'
        << format_double(d.box.x1) << ',' << format_double(d.box.y1) << ','
        << format_double(d.box.x2) << ',' << format_double(d.box.y2) << '\t'
        << format_double(r.original_score) << '\n';
  }
  if (!out.flush()) throw std::runtime_error("write failed: " + a.out);

  RescoreSummary summary;
  if (!a.gt.empty()) {
    const auto gt = load_ground_truth_boxes(a.gt);
    const ApVariant variant = parse_ap_variant(a.ap_variant);
    std::vector<DetectionRecord> rescored;
    for (const auto& r : result.detections) rescored.push_back(r.detection);
    summary.raw_map = detection_ap(detections, gt, 0.5, variant).map;
    summary.rescored_map = detection_ap(rescored, gt, 0.5, variant).map;
    if (!a.quiet) {
      auto pct = [](const std::optional<double>& v) {
        std::ostringstream os;
        if (v) {
          os << std::fixed << std::setprecision(1) << 100.0 * *v;
        } else {
          os << "n/a";
        }
        return os.str();
      };
      *ctx.out << "detection mAP [%]  raw " << pct(summary.raw_map) << "  rescored "
               << pct(summary.rescored_map) << '\n';
    }
  }
  return summary;
}

// ---------------------------------------------------------- e2e-synthetic

struct E2eArgs {
  std::string out_dir = "scene2obj-e2e";
  std::size_t scenes = 20, objects = 100, images = 500;
  double confidence = 0.5;
  std::size_t spread = 3;
  std::size_t draws = kDefaultDraws;
};

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * *v;
  return os.str();
}

void cmd_e2e(const E2eArgs& a, const Context& ctx) {
  if (a.confidence <= 0 || a.confidence > 1) throw UsageError("--confidence must lie in (0, 1]");
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  auto file = [&](const char* name) { return (dir / name).string(); };
  std::ostringstream sink;
  Context quiet = ctx;
  quiet.out = &sink;

  WorldConfig world_config;
  world_config.num_scenes = a.scenes;
  world_config.num_objects = a.objects;
  world_config.num_images = a.images;
  world_config.seed = ctx.seed;
  const SyntheticWorld world = generate_world(world_config);
  save_name_list(world.scenes, file("scenes.txt"), ctx.header);
  save_name_list(world.objects, file("objects.txt"), ctx.header);
  save_lemma_map(world.lemma_map, file("lemma_map.tsv"), ctx.header);
  save_tagged_corpus(world.corpus, file("corpus.tsv"), ctx.header);
  save_annotations(world.images, file("annotations.tsv"), ctx.header);

  // A simulated scene classifier: per-image confidence on the true scene,
  // the rest spread unevenly over `spread` other scenes.
  const auto vocab = std::make_shared<Vocabulary>(
      Vocabulary::build(world.scenes, world.objects, world.lemma_map));
  const std::size_t spread = std::min(a.spread, world.scenes.size() - 1);
  std::vector<SceneScoreRow> rows;
  for (std::size_t i = 0; i < world.images.size(); ++i) {
    const auto& image = world.images[i];
    CounterRng rng(ctx.seed, {0xc1a55, i});
    const std::size_t truth = *vocab->scene_index(image.scene_label);
    const double confidence = spread == 0 ? 1.0 : std::min(1.0, a.confidence * (0.5 + rng.uniform()));
    std::vector<double> probs(world.scenes.size(), 0.0);
    probs[truth] = confidence;
    std::vector<std::size_t> others;
    for (std::size_t s = 0; s < world.scenes.size(); ++s) {
      if (s != truth) others.push_back(s);
    }
    std::vector<double> weights(spread);
    double total = 0;
    for (std::size_t j = 0; j < spread; ++j) {
      std::swap(others[j], others[j + rng() % (others.size() - j)]);
      weights[j] = 0.2 + rng.uniform();
      total += weights[j];
    }
    for (std::size_t j = 0; j < spread; ++j) {
      probs[others[j]] += (1.0 - confidence) * weights[j] / total;
    }
    SceneScoreRow row{image.image_id, {}};
    for (std::size_t s = 0; s < probs.size(); ++s) {
      if (probs[s] > 0) row.scores.emplace_back(world.scenes[s], probs[s]);
    }
    rows.push_back(std::move(row));
  }
  save_scene_scores(rows, file("scene_scores.tsv"), ctx.header);

  const std::size_t num_triples =
      cmd_extract({file("corpus.tsv"), file("lemma_map.tsv"), "", "", file("triples.tsv")}, quiet);
  cmd_build_matrix({file("triples.tsv"), file("scenes.txt"), file("objects.txt"),
                    file("lemma_map.tsv"), "on", file("text_matrix.tsv")},
                   quiet);
  cmd_gt_matrix({file("annotations.tsv"), file("scenes.txt"), file("objects.txt"),
                 file("lemma_map.tsv"), file("gt_matrix.tsv")},
                quiet);

  const auto scene_acc =
      cmd_scene_eval({file("scene_scores.tsv"), file("annotations.tsv"), file("scenes.txt"), "",
                      "sum", {1, 3, 5}, file("scene_eval.tsv")},
                     quiet);

  struct Run {
    const char* name;
    const char* matrix;
    bool perfect;
  };
  const Run runs[] = {{"text_perfect", "text_matrix.tsv", true},
                      {"text_classifier", "text_matrix.tsv", false},
                      {"gt_perfect", "gt_matrix.tsv", true}};
  std::vector<EvalReport> reports;
  for (const Run& run : runs) {
    PredictArgs p;
    p.matrix = file(run.matrix);
    p.scenes = file("scenes.txt");
    p.objects = file("objects.txt");
    p.lemma_map = file("lemma_map.tsv");
    if (run.perfect) {
      p.annotations = file("annotations.tsv");
      p.perfect_scene = true;
    } else {
      p.scene_scores = file("scene_scores.tsv");
    }
    p.draws = a.draws;
    const std::string stem = std::string(run.name);
    p.out = file(("pred_" + stem + ".tsv").c_str());
    cmd_predict(p, quiet);

    EvaluateArgs e;
    e.predictions = p.out;
    e.annotations = file("annotations.tsv");
    e.objects = file("objects.txt");
    e.out = file(("report_" + stem + ".tsv").c_str());
    e.quiet = true;
    reports.push_back(cmd_evaluate(e, quiet));
  }

  // Detection rescoring on a separate synthetic detection set.
  DetectionConfig det_config;
  det_config.seed = mix_keys(ctx.seed, {0x7a11});
  const DetectionSet train = generate_detection_set(det_config);
  det_config.seed = mix_keys(ctx.seed, {0x7e57});
  const DetectionSet test = generate_detection_set(det_config);
  const auto class_vocab = object_vocabulary(train.classes);
  save_detections(train.detections, file("det_train.tsv"), ctx.header);
  save_ground_truth_boxes(train.ground_truth, file("det_train_gt.tsv"), ctx.header);
  save_presence_scores(train.presence, *class_vocab, file("det_train_presence.tsv"), ctx.header);
  std::vector<DetectionRecord> unlabeled = test.detections;
  for (auto& d : unlabeled) d.tp_label.reset();
  save_detections(unlabeled, file("det_test.tsv"), ctx.header);
  save_ground_truth_boxes(test.ground_truth, file("det_test_gt.tsv"), ctx.header);
  save_presence_scores(test.presence, *class_vocab, file("det_test_presence.tsv"), ctx.header);
  RescoreTrainArgs rt;
  rt.detections = file("det_train.tsv");
  rt.gt = file("det_train_gt.tsv");
  rt.predictions = file("det_train_presence.tsv");
  rt.out = file("rescorer.tsv");
  cmd_rescore_train(rt, quiet);
  const RescoreSummary det = cmd_rescore({file("det_test.tsv"), file("rescorer.tsv"),
                                          file("det_test_presence.tsv"), file("det_test_gt.tsv"),
                                          file("det_rescored.tsv"), "all", true},
                                         quiet);

  std::ostream& out = *ctx.out;
  out << "scene2obj " << SCENE2OBJ_VERSION << " e2e-synthetic (seed " << ctx.seed << ")\n";
  out << "world: " << a.scenes << " scenes, " << a.objects << " objects, " << a.images
      << " images, " << world.corpus.size() << " sentences, " << num_triples << " triples\n\n";
  out << "Scene classifier top-k accuracy [%]:";
  for (const auto& [k, acc] : scene_acc) out << "  k=" << k << ' ' << percent(acc);
  out << "\n\n";
  out << "Presence mAP [%]\n";
  out << "  chance                      " << percent(reports[0].overall_chance_map) << '\n';
  out << "  text matrix, classifier     " << percent(reports[1].overall_map) << '\n';
  out << "  text matrix, perfect scene  " << percent(reports[0].overall_map) << '\n';
  out << "  GT matrix, perfect scene    " << percent(reports[2].overall_map) << "\n\n";
  out << "Top-k object accuracy [%], text matrix, perfect scene:";
  for (const auto& [k, acc] : reports[0].topk_accuracy) out << "  k=" << k << ' ' << percent(acc);
  out << "\n\n";
  out << "Detection mAP [%]: raw " << percent(det.raw_map) << ", scene-context rescored "
      << percent(det.rescored_map) << '\n';

  auto summary = tsv::open_output(file("summary.tsv"), ctx.header);
  auto row = [&](const std::string& key, const std::optional<double>& v) {
    summary << key << '\t' << (v ? format_double(*v) : std::string("NA")) << '\n';
  };
  for (const auto& [k, acc] : scene_acc) row("scene_top" + std::to_string(k), acc);
  row("chance_map", reports[0].overall_chance_map);
  row("text_classifier_map", reports[1].overall_map);
  row("text_perfect_map", reports[0].overall_map);
  row("gt_perfect_map", reports[2].overall_map);
  row("detection_raw_map", det.raw_map);
  row("detection_rescored_map", det.rescored_map);
  if (!summary.flush()) throw std::runtime_error("write failed: summary.tsv");
}

// ---------------------------------------------------------------- parsing

std::string flag_value(const CLI::Option* opt) {
  std::string joined;
  for (const auto& r : opt->results()) {
    if (!joined.empty()) joined += ',';
    joined += r;
  }
  return joined;
}

// Effective flags of the chosen subcommand, in definition order.
std::vector<std::string> reproducibility_header(const CLI::App* sub, std::uint64_t seed) {
  std::string flags = sub->get_name();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help") continue;
    if (opt->get_expected_min() == 0) {
      if (opt->count() > 0) flags += " " + name;
    } else if (opt->count() > 0) {
      flags += " " + name + " " + flag_value(opt);
    } else if (!opt->get_default_str().empty()) {
      flags += " " + name + " " + opt->get_default_str();
    }
  }
  return {std::string("scene2obj ") + SCENE2OBJ_VERSION, "seed: " + std::to_string(seed),
          "command: " + flags};
}

const std::set<std::string> kLevels{"trace", "debug", "info", "warn", "error", "critical", "off"};

void setup_logging(std::ostream& err, std::string level) {
  if (const char* env = std::getenv("SCENE2OBJ_LOG"); env != nullptr && *env != '\0') {
    level = env;
  }
  if (kLevels.count(level) == 0) throw UsageError("unknown log level '" + level + "'");
  spdlog::drop("scene2obj");
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("scene2obj", sink);
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::from_str(level));
  spdlog::register_logger(log);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot object presence prediction from text-derived scene context",
               "scene2obj"};
  app.set_version_flag("--version", SCENE2OBJ_VERSION);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string log_level = "info";
  app.add_option("--seed", seed, "Seed for every random stream")->default_val(0);
  app.add_option("--threads", threads, "Worker threads; outputs do not depend on it")
      ->default_val(1)
      ->check(CLI::Range(1u, 1024u));
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|critical|off")
      ->default_val("info");

  auto on_off = CLI::IsMember({"on", "off"});

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Extract relation triples from a tagged corpus");
  extract->add_option("--corpus", ex.corpus, "Tagged corpus TSV")->required();
  extract->add_option("--lemma-map", ex.lemma_map, "surface<TAB>lemma file");
  extract->add_option("--relation-dict", ex.relation_dict, "Allowed relation phrases");
  extract->add_option("--pos-map", ex.pos_map, "tag<TAB>coarse tag file");
  extract->add_option("--out", ex.out, "Triples TSV")->required();

  BuildMatrixArgs bm;
  auto* build = app.add_subcommand("build-matrix", "Count scene-object relations");
  build->add_option("--triples", bm.triples)->required();
  build->add_option("--scenes", bm.scenes)->required();
  build->add_option("--objects", bm.objects)->required();
  build->add_option("--lemma-map", bm.lemma_map);
  build->add_option("--self-similarity", bm.self_similarity)->default_val("on")->check(on_off);
  build->add_option("--out", bm.out)->required();

  GtMatrixArgs gm;
  auto* gt = app.add_subcommand("gt-matrix", "Context matrix from image annotations");
  gt->add_option("--annotations", gm.annotations)->required();
  gt->add_option("--scenes", gm.scenes)->required();
  gt->add_option("--objects", gm.objects)->required();
  gt->add_option("--lemma-map", gm.lemma_map);
  gt->add_option("--out", gm.out)->required();

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Object presence scores per image");
  predict->add_option("--matrix", pr.matrix)->required();
  predict->add_option("--scenes", pr.scenes, "Defaults to the names in the matrix");
  predict->add_option("--objects", pr.objects, "Defaults to the names in the matrix");
  predict->add_option("--lemma-map", pr.lemma_map);
  predict->add_option("--scene-scores", pr.scene_scores);
  predict->add_option("--annotations", pr.annotations);
  predict->add_flag("--perfect-scene", pr.perfect_scene, "One-hot on the annotated scene");
  predict->add_option("--normalization", pr.normalization, "sum|softmax|softmax:<T>")
      ->default_val("sum");
  predict->add_option("--alpha", pr.alpha, "auto|<value>")->default_val("auto");
  predict->add_option("--sigma", pr.sigma, "auto|<value>")->default_val("auto");
  predict->add_option("--sigma-source", pr.sigma_source,
                      "prob-std|count-std-normalized|fixed:<v>, used by --sigma auto")
      ->default_val("prob-std");
  predict->add_option("--draws", pr.draws)->default_val(kDefaultDraws);
  predict->add_option("--out", pr.out)->required();

  SceneEvalArgs se;
  auto* scene_eval = app.add_subcommand("scene-eval", "Top-k scene classification accuracy");
  scene_eval->add_option("--scene-scores", se.scene_scores)->required();
  scene_eval->add_option("--annotations", se.annotations)->required();
  scene_eval->add_option("--scenes", se.scenes, "Defaults to every scene name seen");
  scene_eval->add_option("--lemma-map", se.lemma_map);
  scene_eval->add_option("--normalization", se.normalization)->default_val("sum");
  scene_eval->add_option("--k", se.k)->delimiter(',')->default_str("1,3,5");
  scene_eval->add_option("--out", se.out, "Optional TSV report");

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Presence AP, mAP and top-k accuracy");
  evaluate_cmd->add_option("--predictions", ev.predictions)->required();
  evaluate_cmd->add_option("--annotations", ev.annotations)->required();
  evaluate_cmd->add_option("--objects", ev.objects, "Defaults to the objects in --predictions");
  evaluate_cmd->add_option("--lemma-map", ev.lemma_map);
  evaluate_cmd->add_option("--classes", ev.classes, "Name file or top<N>");
  evaluate_cmd->add_option("--ap-variant", ev.ap_variant)
      ->default_val("all")
      ->check(CLI::IsMember({"all", "11pt"}));
  evaluate_cmd->add_option("--k-list", ev.k_list)->delimiter(',')->default_str("1,2,3,4,5");
  evaluate_cmd->add_option("--set-sizes", ev.set_sizes)
      ->delimiter(',')
      ->default_str("20,40,60,80,100");
  evaluate_cmd->add_flag("--count-instances", ev.count_instances);
  evaluate_cmd->add_option("--chance", ev.chance, "prevalence|analytic|empirical:<seed>,<trials>")
      ->default_val("analytic");
  evaluate_cmd->add_option("--out", ev.out, "TSV report");
  evaluate_cmd->add_option("--plot", ev.plot, "Accuracy-vs-k SVG");

  RescoreTrainArgs rt;
  auto* rescore_train = app.add_subcommand("rescore-train", "Train scene-context rescorers");
  rescore_train->add_option("--detections", rt.detections)->required();
  rescore_train->add_option("--gt", rt.gt, "Ground-truth boxes; else labels from --detections");
  rescore_train->add_option("--predictions", rt.predictions)->required();
  rescore_train->add_option("--C", rt.C)->default_val(1.0);
  rescore_train->add_option("--tol", rt.tol)->default_val(0.01);
  rescore_train->add_option("--standardize", rt.standardize)->default_val("on")->check(on_off);
  rescore_train->add_flag("--calibration-only", rt.calibration_only,
                          "Unit weight on the detector score");
  rescore_train->add_option("--out", rt.out)->required();

  RescoreArgs rs;
  auto* rescore_cmd = app.add_subcommand("rescore", "Replace detection scores");
  rescore_cmd->add_option("--detections", rs.detections)->required();
  rescore_cmd->add_option("--model", rs.model)->required();
  rescore_cmd->add_option("--predictions", rs.predictions)->required();
  rescore_cmd->add_option("--gt", rs.gt, "Report detection mAP before and after");
  rescore_cmd->add_option("--ap-variant", rs.ap_variant)
      ->default_val("all")
      ->check(CLI::IsMember({"all", "11pt"}));
  rescore_cmd->add_option("--out", rs.out)->required();

  E2eArgs e2e;
  auto* e2e_cmd = app.add_subcommand("e2e-synthetic", "Run the whole pipeline on a synthetic world");
  e2e_cmd->add_option("--out-dir", e2e.out_dir)->default_val("scene2obj-e2e");
  e2e_cmd->add_option("--scenes", e2e.scenes)->default_val(20)->check(CLI::PositiveNumber);
  e2e_cmd->add_option("--objects", e2e.objects)->default_val(100)->check(CLI::PositiveNumber);
  e2e_cmd->add_option("--images", e2e.images)->default_val(500)->check(CLI::PositiveNumber);
  e2e_cmd->add_option("--confidence", e2e.confidence, "Mean classifier mass on the true scene")
      ->default_val(0.5);
  e2e_cmd->add_option("--spread", e2e.spread)->default_val(3);
  e2e_cmd->add_option("--draws", e2e.draws)->default_val(kDefaultDraws);

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << SCENE2OBJ_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n"
        << "Run 'scene2obj --help' for usage.\n";
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    setup_logging(err, log_level);
    Context ctx{seed, threads, reproducibility_header(sub, seed), &out};
    if (sub == extract) {
      cmd_extract(ex, ctx);
    } else if (sub == build) {
      cmd_build_matrix(bm, ctx);
    } else if (sub == gt) {
      cmd_gt_matrix(gm, ctx);
    } else if (sub == predict) {
      cmd_predict(pr, ctx);
    } else if (sub == scene_eval) {
      cmd_scene_eval(se, ctx);
    } else if (sub == evaluate_cmd) {
      cmd_evaluate(ev, ctx);
    } else if (sub == rescore_train) {
      cmd_rescore_train(rt, ctx);
    } else if (sub == rescore_cmd) {
      cmd_rescore(rs, ctx);
    } else if (sub == e2e_cmd) {
      cmd_e2e(e2e, ctx);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n"
        << sub->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    if (auto log = logger()) {
      log->error("{}", e.what());
    } else {
      err << "error: " << e.what() << '\n';
    }
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace scene2obj::cli
