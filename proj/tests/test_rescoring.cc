#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "scene2obj/linear_svm.h"
#include "scene2obj/rescoring.h"
#include "scene2obj/synthetic.h"
#include "support/generators.h"
#include "support/temp_dir.h"

using namespace scene2obj;
using scene2obj::testing::Gen;
using scene2obj::testing::TempDir;

namespace {

double primal_objective(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                        double w, double b, double C) {
  double loss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    loss += std::max(0.0, 1.0 - y[i] * (w * x[i][0] + b));
  }
  return 0.5 * w * w + C * loss;
}

Box random_box(Gen& g) {
  const double x = g.real(0, 50), y = g.real(0, 50);
  return {x, y, x + g.real(1, 30), y + g.real(1, 30)};
}

}  // namespace

TEST_CASE("svm: separable sets are classified by margin sign") {
  const auto two = train_linear_svm({{1.0, 2.0}, {-1.0, -0.5}}, {1, -1});
  CHECK(two.margin({1.0, 2.0}) > 0);
  CHECK(two.margin({-1.0, -0.5}) < 0);
  CHECK(two.converged);

  Gen g(41);
  for (int round = 0; round < 50; ++round) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    const double wx = g.real(-1, 1), wy = g.real(-1, 1);
    while (x.size() < 30) {
      const std::vector<double> p{g.real(-5, 5), g.real(-5, 5)};
      const double f = wx * p[0] + wy * p[1];
      if (std::abs(f) < 0.5) continue;
      x.push_back(p);
      y.push_back(f > 0 ? 1 : -1);
    }
    if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), -1) == 0) continue;
    SvmParams params;
    params.C = 100;
    params.tolerance = 1e-4;
    const auto svm = train_linear_svm(x, y, params);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(svm.margin(x[i]) * y[i] > 0);
  }
  CHECK_THROWS_AS(train_linear_svm({{1.0}, {2.0}}, {1, 1}), std::invalid_argument);
}

TEST_CASE("svm: objective is no worse than a grid search in one dimension") {
  Gen g(42);
  for (int round = 0; round < 10; ++round) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 12; ++i) {
      const int label = i % 2 == 0 ? 1 : -1;
      x.push_back({label * 0.5 + g.real(-1.5, 1.5)});
      y.push_back(label);
    }
    SvmParams params;
    params.tolerance = 1e-6;
    const auto svm = train_linear_svm(x, y, params);
    double best = 1e300;
    for (int i = -400; i <= 400; ++i) {
      for (int j = -400; j <= 400; ++j) {
        best = std::min(best, primal_objective(x, y, i * 0.02, j * 0.01, 1.0));
      }
    }
    CHECK(primal_objective(x, y, svm.weights[0], svm.bias, 1.0) <= best + 1e-4);
  }
}

TEST_CASE("platt: stationary point of the regularized likelihood, monotone") {
  Gen g(43);
  for (int round = 0; round < 100; ++round) {
    std::vector<double> m;
    std::vector<int> y;
    for (std::size_t i = 0, n = g.size(2, 60); i < n; ++i) {
      const int label = g.coin() ? 1 : -1;
      m.push_back(label * g.real(0, 1) + g.real(-1.5, 1.5));
      y.push_back(label);
    }
    y[0] = 1;
    y[1] = -1;
    const auto cal = fit_platt(m, y);
    const double np = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double nn = static_cast<double>(y.size()) - np;
    double grad_a = 0, grad_b = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double t = y[i] > 0 ? (np + 1) / (np + 2) : 1 / (nn + 2);
      const double r = t - cal(m[i]);
      grad_a += r * m[i];
      grad_b += r;
    }
    CHECK(std::abs(grad_a) <= 1e-5 * static_cast<double>(m.size()));
    CHECK(std::abs(grad_b) <= 1e-5 * static_cast<double>(m.size()));
    if (cal.a != 0) {
      for (double v = -3; v < 3; v += 0.25) {
        CHECK(cal(v) > 0);
        CHECK(cal(v) < 1);
        if (cal.a < 0) CHECK(cal(v + 0.25) > cal(v));
      }
    }
  }
  CHECK(fit_platt({-2, -1, 1, 2}, {-1, -1, 1, 1}).a < 0);
}

TEST_CASE("IoU: worked values and properties") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(iou({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
  Gen g(44);
  for (int round = 0; round < 2000; ++round) {
    const Box a = random_box(g), b = random_box(g);
    const double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0);
    CHECK(v <= 1);
    if (!(a == b)) CHECK(v < 1);
  }
}

TEST_CASE("matching: duplicates are false positives, threshold applies") {
  const std::vector<GroundTruthBox> gt{{"i", "car", {0, 0, 10, 10}}};
  std::vector<DetectionRecord> dets{{"i", "car", 0.9, {0, 0, 10, 10}, {}},
                                    {"i", "car", 0.8, {0, 0, 10, 10}, {}}};
  CHECK(match_detections(dets, gt) == std::vector<bool>{true, false});
  const auto ap = detection_ap(dets, gt);
  CHECK(*ap.ap.at("car") == 1.0);
  CHECK(*ap.map == 1.0);

  CHECK(match_detections({{"i", "car", 0.9, {5, 0, 15, 10}, {}}}, gt) == std::vector<bool>{false});
  CHECK(match_detections({{"i", "bus", 0.9, {0, 0, 10, 10}, {}}}, gt) == std::vector<bool>{false});
  CHECK(match_detections({{"j", "car", 0.9, {0, 0, 10, 10}, {}}}, gt) == std::vector<bool>{false});
  CHECK_THROWS(match_detections(dets, gt, 0.0));
  CHECK_THROWS(match_detections(dets, gt, 1.0));

  // Lower-scored detection listed first still loses the box.
  std::reverse(dets.begin(), dets.end());
  CHECK(match_detections(dets, gt) == std::vector<bool>{false, true});
  CHECK(!detection_ap({}, {}).map);
  CHECK(*detection_ap({}, gt).ap.at("car") == 0.0);
}

TEST_CASE("property: matching never reuses a ground-truth box") {
  Gen g(45);
  for (int round = 0; round < 300; ++round) {
    std::vector<GroundTruthBox> gt;
    std::vector<DetectionRecord> dets;
    for (std::size_t i = 0, n = g.size(0, 6); i < n; ++i) {
      gt.push_back({"i" + std::to_string(g.size(0, 2)), g.coin() ? "a" : "b", random_box(g)});
    }
    for (std::size_t i = 0, n = g.size(0, 12); i < n; ++i) {
      Box b = random_box(g);
      if (!gt.empty() && g.coin(0.6)) {
        const auto& t = gt[g.size(0, gt.size() - 1)];
        dets.push_back({t.image_id, t.class_name, g.real(0, 1), t.box, {}});
        continue;
      }
      dets.push_back({"i" + std::to_string(g.size(0, 2)), g.coin() ? "a" : "b", g.real(0, 1), b, {}});
    }
    const auto tp = match_detections(dets, gt);
    REQUIRE(tp.size() == dets.size());
    // Every TP needs a distinct same-image, same-class box at IoU >= 0.5.
    std::set<std::size_t> used;
    std::vector<std::size_t> order(dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return dets[x].score > dets[y].score; });
    std::size_t hits = 0;
    for (std::size_t i : order) {
      if (!tp[i]) continue;
      ++hits;
      bool found = false;
      for (std::size_t k = 0; k < gt.size(); ++k) {
        if (used.count(k) || gt[k].image_id != dets[i].image_id ||
            gt[k].class_name != dets[i].class_name || iou(gt[k].box, dets[i].box) < 0.5) {
          continue;
        }
        found = true;
      }
      CHECK(found);
      double best = -1;
      std::size_t pick = 0;
      for (std::size_t k = 0; k < gt.size(); ++k) {
        if (used.count(k) || gt[k].image_id != dets[i].image_id ||
            gt[k].class_name != dets[i].class_name) {
          continue;
        }
        const double v = iou(gt[k].box, dets[i].box);
        if (v > best) {
          best = v;
          pick = k;
        }
      }
      used.insert(pick);
    }
    CHECK(hits <= gt.size());
  }
}

TEST_CASE("descriptor: score then the image's presence vector") {
  const std::vector<PresenceScores> presence{{"i", {0.2, 0.7}}};
  const auto index = index_presence(presence);
  const DetectionRecord a{"i", "car", 0.9, {0, 0, 1, 1}, {}};
  const DetectionRecord b{"i", "car", 0.3, {5, 5, 9, 9}, {}};
  CHECK(build_descriptor(a, index) == ContextDescriptor{0.9, 0.2, 0.7});
  CHECK(build_descriptor(b, index) == ContextDescriptor{0.3, 0.2, 0.7});
  CHECK_THROWS_AS(build_descriptor({"missing", "car", 0.1, {0, 0, 1, 1}, {}}, index),
                  std::out_of_range);
}

TEST_CASE("rescorer: informative presence feature outweighs a noisy score") {
  Gen g(46);
  std::vector<ContextDescriptor> x;
  std::vector<bool> labels;
  for (int i = 0; i < 200; ++i) {
    const bool tp = i % 2 == 0;
    x.push_back({g.real(0, 1), tp ? g.real(0.6, 1) : g.real(0, 0.4), g.real(0, 1)});
    labels.push_back(tp);
  }
  for (bool standardize : {true, false}) {
    RescorerParams params;
    params.standardize = standardize;
    const auto model = train_rescorer(x, labels, "car", params);
    CHECK(std::abs(model.weights[1]) > std::abs(model.weights[0]));
    CHECK(model.calibration.a < 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK((model.probability(x[i]) > 0.5) == labels[i]);
    }
  }
  CHECK_THROWS_AS(train_rescorer(x, std::vector<bool>(x.size(), true), "car"),
                  std::invalid_argument);
  CHECK_THROWS(train_rescorer(x, labels, "car").margin({1.0}));
}

TEST_CASE("calibration-only model preserves per-class ranking and AP") {
  DetectionConfig config;
  config.seed = 3;
  const auto set = generate_detection_set(config);
  const auto tp = match_detections(set.detections, set.ground_truth);
  const auto index = index_presence(set.presence);
  RescorerSet models;
  for (const auto& cls : set.classes) {
    std::vector<ContextDescriptor> x;
    std::vector<bool> y;
    for (std::size_t i = 0; i < set.detections.size(); ++i) {
      if (set.detections[i].class_name != cls) continue;
      x.push_back(build_descriptor(set.detections[i], index));
      y.push_back(tp[i]);
    }
    models[cls] = train_calibration_only(x, y, cls);
    REQUIRE(models[cls].calibration.a < 0);
  }
  const auto result = rescore(set.detections, models, set.presence);
  std::vector<DetectionRecord> rescored;
  for (const auto& r : result.detections) rescored.push_back(r.detection);
  const auto before = detection_ap(set.detections, set.ground_truth);
  const auto after = detection_ap(rescored, set.ground_truth);
  for (const auto& [cls, ap] : before.ap) CHECK(std::abs(*ap - *after.ap.at(cls)) <= 1e-12);
}

TEST_CASE("rescore: passthrough, empty input, gain on informative context") {
  DetectionConfig config;
  config.seed = 4;
  const auto train = generate_detection_set(config);
  config.seed = 5;
  const auto test = generate_detection_set(config);
  const auto summary =
      train_rescorers(train.detections, match_detections(train.detections, train.ground_truth),
                      train.presence);
  CHECK(summary.models.size() == train.classes.size());
  const auto result = rescore(test.detections, summary.models, test.presence);
  std::vector<DetectionRecord> rescored;
  for (const auto& r : result.detections) {
    CHECK(r.rescored);
    rescored.push_back(r.detection);
  }
  CHECK(*detection_ap(rescored, test.ground_truth).map >
        *detection_ap(test.detections, test.ground_truth).map);

  CHECK(rescore({}, summary.models, test.presence).detections.empty());
  const DetectionRecord unknown{test.detections[0].image_id, "zebra", 0.4, {0, 0, 1, 1}, {}};
  const auto pass = rescore({unknown}, summary.models, test.presence);
  CHECK(pass.passed_through == 1);
  CHECK(!pass.detections[0].rescored);
  CHECK(pass.detections[0].detection == unknown);
  CHECK(pass.detections[0].original_score == 0.4);
}

TEST_CASE("model file: round trip and validation") {
  DetectionConfig config;
  config.seed = 6;
  config.num_classes = 3;
  const auto set = generate_detection_set(config);
  auto models =
      train_rescorers(set.detections, match_detections(set.detections, set.ground_truth),
                      set.presence)
          .models;
  RescorerParams raw;
  raw.standardize = false;
  std::vector<ContextDescriptor> x{{0.1, 0.0, 0.0, 0.0}, {0.9, 1.0, 0.0, 0.0}};
  models["plain"] = train_rescorer(x, {false, true}, "plain", raw);
  TempDir dir;
  save_rescorers(models, dir.file("m.tsv"), {"hdr"});
  const auto back = load_rescorers(dir.file("m.tsv"));
  REQUIRE(back.size() == models.size());
  for (const auto& [cls, m] : models) {
    const auto& b = back.at(cls);
    CHECK(b.weights == m.weights);
    CHECK(b.bias == m.bias);
    CHECK(b.feature_mean == m.feature_mean);
    CHECK(b.feature_scale == m.feature_scale);
    CHECK(b.standardize == m.standardize);
    CHECK(b.calibration.a == m.calibration.a);
    CHECK(b.calibration.b == m.calibration.b);
  }
  const std::string text = TempDir::read(dir.file("m.tsv"));
  CHECK_THROWS(load_rescorers(dir.write("v.tsv", "format\tscene2obj-rescorer\t2\n")));
  const auto cut = text.rfind("weights\t");
  CHECK_THROWS(load_rescorers(dir.write("c.tsv", text.substr(0, cut))));
}
