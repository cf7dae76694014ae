#include "scene2obj/linear_svm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scene2obj {

namespace {

constexpr double kTau = 1e-12;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double LinearSvm::margin(const std::vector<double>& x) const {
  if (x.size() != weights.size()) throw std::invalid_argument("feature length mismatch");
  return dot(weights, x) + bias;
}

LinearSvm train_linear_svm(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels, const SvmParams& params) {
  const std::size_t n = features.size();
  if (labels.size() != n) throw std::invalid_argument("features and labels differ in length");
  if (!(params.C > 0)) throw std::invalid_argument("C must be positive");
  if (!(params.tolerance > 0)) throw std::invalid_argument("tolerance must be positive");
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1) {
      has_pos = true;
    } else if (y == -1) {
      has_neg = true;
    } else {
      throw std::invalid_argument("labels must be +1 or -1");
    }
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("training needs both classes");
  const std::size_t dim = features.front().size();
  for (const auto& x : features) {
    if (x.size() != dim) throw std::invalid_argument("ragged feature matrix");
  }

  const double C = params.C;
  std::vector<double> alpha(n, 0.0), grad(n, -1.0), diag(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels[i];
    diag[i] = dot(features[i], features[i]);
  }
  auto in_up = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0);
  };
  auto in_low = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C);
  };

  LinearSvm model;
  std::vector<double> k_i(n), k_j(n);
  while (true) {
    // Working set: i maximizes -y G over I_up; j uses second-order gain.
    double g_max = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * grad[t] >= g_max) {
        g_max = -y[t] * grad[t];
        i = t;
      }
    }
    if (i == n) break;
    for (std::size_t t = 0; t < n; ++t) k_i[t] = dot(features[i], features[t]);

    double g_max2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      g_max2 = std::max(g_max2, y[t] * grad[t]);
      const double b = g_max + y[t] * grad[t];
      if (b > 0) {
        double a = diag[i] + diag[t] - 2.0 * k_i[t];
        if (a <= 0) a = kTau;
        if (-(b * b) / a <= best_obj) {
          best_obj = -(b * b) / a;
          j = t;
        }
      }
    }
    model.final_violation = g_max + g_max2;
    if (model.final_violation < params.tolerance || j == n) {
      model.converged = true;
      break;
    }
    if (model.iterations >= params.max_iterations) break;
    ++model.iterations;

    for (std::size_t t = 0; t < n; ++t) k_j[t] = dot(features[j], features[t]);
    const double q_ij = y[i] * y[j] * k_i[j];
    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = diag[i] + diag[j] + 2.0 * q_ij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = diag[i] + diag[j] - 2.0 * q_ij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double d_i = alpha[i] - old_i, d_j = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[i] * k_i[t] * d_i + y[j] * k_j[t] * d_j);
    }
  }

  model.weights.assign(dim, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] == 0) continue;
    for (std::size_t d = 0; d < dim; ++d) model.weights[d] += alpha[t] * y[t] * features[t][d];
  }

  // Offset: average y G over free vectors, else the midpoint of the
  // feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0;
  std::size_t num_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++num_free;
      sum_free += yg;
    }
  }
  const double rho = num_free > 0 ? sum_free / static_cast<double>(num_free) : (ub + lb) / 2;
  model.bias = -rho;
  return model;
}

double PlattCalibration::operator()(double margin) const {
  const double f = a * margin + b;
  // Evaluate in the stable direction.
  return f >= 0 ? std::exp(-f) / (1.0 + std::exp(-f)) : 1.0 / (1.0 + std::exp(f));
}

PlattCalibration fit_platt(const std::vector<double>& margins, const std::vector<int>& labels) {
  const std::size_t n = margins.size();
  if (labels.size() != n) throw std::invalid_argument("margins and labels differ in length");
  double prior1 = 0, prior0 = 0;
  for (int y : labels) (y > 0 ? prior1 : prior0) += 1;
  if (prior1 == 0 || prior0 == 0) throw std::invalid_argument("calibration needs both classes");

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = labels[i] > 0 ? hi : lo;

  auto objective = [&](double a, double b) {
    double f = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = margins[i] * a + b;
      f += z >= 0 ? target[i] * z + std::log1p(std::exp(-z))
                  : (target[i] - 1) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(a, b);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = margins[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += margins[i] * margins[i] * d2;
      h22 += d2;
      h21 += margins[i] * d2;
      const double d1 = target[i] - p;
      g1 += margins[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 0.0001 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {a, b};
}

}  // namespace scene2obj
