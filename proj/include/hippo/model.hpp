#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hippo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// f(x) = 1/2 |A x - b|^2 + (ridge/2) |x|^2.
class LocalObjective {
 public:
  LocalObjective(Mat a, Vec b, double ridge = 0.0);

  Eigen::Index dim() const { return a_.cols(); }
  Eigen::Index rows() const { return a_.rows(); }
  const Mat& data() const { return a_; }
  const Vec& response() const { return b_; }
  double ridge() const { return ridge_; }

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  /// Constant for this loss; the argument is kept for the general interface.
  const Mat& hessian(const Vec& x) const;
  /// grad f(x) - grad f(y). Exact linear form for the quadratic loss.
  Vec gradient_difference(const Vec& x, const Vec& y) const;
  /// A^T b, cached.
  const Vec& linear_term() const { return atb_; }

 private:
  Mat a_;
  Vec b_;
  double ridge_;
  Mat hessian_;
  Vec atb_;
};

struct ConvexityConstants {
  double m_f = 0.0;  // strong convexity
  double M_f = 0.0;  // gradient Lipschitz
  double L_f = 0.0;  // Hessian Lipschitz (0 for quadratics)
};

/// Throws ModelError when some local Hessian is not positive definite.
ConvexityConstants estimate_constants(std::span<const LocalObjective> objectives);

enum class RegularizerKind { Zero, L1, Box };

/// Nonsmooth part g. For L1, g = weight * |x|_1; for Box, the indicator of
/// [lower, upper] (applied to every coordinate).
struct Regularizer {
  RegularizerKind kind = RegularizerKind::Zero;
  double weight = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  static Regularizer zero() { return {}; }
  static Regularizer l1(double weight) { return {RegularizerKind::L1, weight, 0.0, 0.0}; }
  static Regularizer box(double lower, double upper) {
    return {RegularizerKind::Box, 0.0, lower, upper};
  }

  /// +infinity outside the box for the indicator.
  double value(const Vec& x) const;
  /// argmin_v g(v) + (mu/2) |v - x|^2.
  Vec prox(const Vec& x, double mu) const;
  /// Euclidean distance from lambda to the subdifferential of g at theta.
  double subdifferential_gap(const Vec& theta, const Vec& lambda) const;
};

std::string to_string(RegularizerKind kind);

/// Componentwise soft threshold.
Vec soft_threshold(const Vec& x, double threshold);

/// 0.1 * |sum_i A_i^T b_i|_inf, the default l1 weight.
double default_l1_weight(std::span<const LocalObjective> objectives);

}  // namespace hippo
