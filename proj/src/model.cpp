#include "hippo/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hippo {

LocalObjective::LocalObjective(Mat a, Vec b, double ridge)
    : a_(std::move(a)), b_(std::move(b)), ridge_(ridge) {
  if (a_.rows() != b_.size()) throw ModelError("local data: row count does not match response");
  if (ridge_ < 0.0) throw ModelError("ridge must be nonnegative");
  hessian_ = a_.transpose() * a_;
  hessian_.diagonal().array() += ridge_;
  atb_ = a_.transpose() * b_;
}

double LocalObjective::value(const Vec& x) const {
  return 0.5 * (a_ * x - b_).squaredNorm() + 0.5 * ridge_ * x.squaredNorm();
}

Vec LocalObjective::gradient(const Vec& x) const {
  return a_.transpose() * (a_ * x - b_) + ridge_ * x;
}

const Mat& LocalObjective::hessian(const Vec&) const { return hessian_; }

Vec LocalObjective::gradient_difference(const Vec& x, const Vec& y) const {
  return hessian_ * (x - y);
}

ConvexityConstants estimate_constants(std::span<const LocalObjective> objectives) {
  if (objectives.empty()) throw ModelError("no local objectives");
  ConvexityConstants c;
  c.m_f = std::numeric_limits<double>::infinity();
  c.M_f = 0.0;
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    const auto& obj = objectives[i];
    Eigen::SelfAdjointEigenSolver<Mat> es(obj.data().transpose() * obj.data(),
                                          Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff() + obj.ridge();
    const double hi = es.eigenvalues().maxCoeff() + obj.ridge();
    if (lo <= 1e-12) {
      std::ostringstream msg;
      msg << "local objective of agent " << i + 1 << " is not strongly convex (smallest Hessian "
          << "eigenvalue " << lo << "); add a ridge term";
      throw ModelError(msg.str());
    }
    c.m_f = std::min(c.m_f, lo);
    c.M_f = std::max(c.M_f, hi);
  }
  c.L_f = 0.0;
  return c;
}

Vec soft_threshold(const Vec& x, double threshold) {
  return x.unaryExpr([threshold](double v) {
    if (v > threshold) return v - threshold;
    if (v < -threshold) return v + threshold;
    return 0.0;
  });
}

double Regularizer::value(const Vec& x) const {
  switch (kind) {
    case RegularizerKind::Zero:
      return 0.0;
    case RegularizerKind::L1:
      return weight * x.lpNorm<1>();
    case RegularizerKind::Box:
      for (Eigen::Index k = 0; k < x.size(); ++k)
        if (x(k) < lower || x(k) > upper) return std::numeric_limits<double>::infinity();
      return 0.0;
  }
  return 0.0;
}

Vec Regularizer::prox(const Vec& x, double mu) const {
  if (!(mu > 0.0)) throw ModelError("prox penalty must be positive");
  switch (kind) {
    case RegularizerKind::Zero:
      return x;
    case RegularizerKind::L1:
      return soft_threshold(x, weight / mu);
    case RegularizerKind::Box:
      return x.cwiseMax(lower).cwiseMin(upper);
  }
  return x;
}

double Regularizer::subdifferential_gap(const Vec& theta, const Vec& lambda) const {
  double sq = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double t = theta(k), l = lambda(k);
    double dist = 0.0;
    switch (kind) {
      case RegularizerKind::Zero:
        dist = l;
        break;
      case RegularizerKind::L1:
        if (t > 0.0) dist = l - weight;
        else if (t < 0.0) dist = l + weight;
        else dist = std::max(0.0, std::abs(l) - weight);
        break;
      case RegularizerKind::Box:
        if (t < lower || t > upper) return std::numeric_limits<double>::infinity();
        if (t > lower && t < upper) dist = l;
        else if (lower == upper) dist = 0.0;
        else if (t == lower) dist = std::max(0.0, l);  // normal cone (-inf, 0]
        else dist = std::min(0.0, l);                  // normal cone [0, inf)
        break;
    }
    sq += dist * dist;
  }
  return std::sqrt(sq);
}

std::string to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::Zero: return "zero";
    case RegularizerKind::L1: return "l1";
    case RegularizerKind::Box: return "box";
  }
  return "unknown";
}

double default_l1_weight(std::span<const LocalObjective> objectives) {
  if (objectives.empty()) return 0.0;
  Vec total = Vec::Zero(objectives.front().dim());
  for (const auto& obj : objectives) total += obj.linear_term();
  return 0.1 * total.lpNorm<Eigen::Infinity>();
}

}  // namespace hippo
