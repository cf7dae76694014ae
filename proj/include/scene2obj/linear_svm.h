// Linear soft-margin SVM and Platt calibration.

#ifndef SCENE2OBJ_LINEAR_SVM_H_
#define SCENE2OBJ_LINEAR_SVM_H_

#include <cstddef>
#include <vector>

namespace scene2obj {

struct SvmParams {
  double C = 1.0;
  // Stop when the maximal KKT violation m(a) - M(a) drops below this.
  double tolerance = 0.01;
  std::size_t max_iterations = 1000000;
};

struct LinearSvm {
  std::vector<double> weights;
  double bias = 0;
  std::size_t iterations = 0;
  double final_violation = 0;
  bool converged = false;

  double margin(const std::vector<double>& x) const;
};

// Solves min 1/2 |w|^2 + C sum_i hinge(y_i (w.x_i + b)) through its dual by
// sequential minimal optimization with maximal-violating-pair selection and
// no shrinking. labels are +1/-1. Throws std::invalid_argument unless both
// labels occur.
LinearSvm train_linear_svm(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels, const SvmParams& params = {});

// p = 1 / (1 + exp(a * margin + b))
struct PlattCalibration {
  double a = -1.0;
  double b = 0.0;

  double operator()(double margin) const;
};

// Regularized maximum-likelihood fit with prior-corrected targets
// (N+ + 1)/(N+ + 2) and 1/(N- + 2), solved by Newton's method with
// backtracking line search.
PlattCalibration fit_platt(const std::vector<double>& margins, const std::vector<int>& labels);

}  // namespace scene2obj

#endif  // SCENE2OBJ_LINEAR_SVM_H_
