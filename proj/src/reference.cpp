#include "hippo/reference.hpp"

namespace hippo {
namespace {

Mat kron_identity(const Mat& skeleton, Eigen::Index dim) {
  Mat out = Mat::Zero(skeleton.rows() * dim, skeleton.cols() * dim);
  for (Eigen::Index r = 0; r < skeleton.rows(); ++r)
    for (Eigen::Index c = 0; c < skeleton.cols(); ++c)
      if (skeleton(r, c) != 0.0)
        out.block(r * dim, c * dim, dim, dim) = skeleton(r, c) * Mat::Identity(dim, dim);
  return out;
}

}  // namespace

AdmmReferenceState AdmmReferenceState::zeros(std::size_t agents, std::size_t edges, Eigen::Index dim) {
  const auto m = static_cast<Eigen::Index>(agents), n = static_cast<Eigen::Index>(edges);
  return {Vec::Zero(m * dim), Vec::Zero(n * dim), Vec::Zero(n * dim),
          Vec::Zero(n * dim), Vec::Zero(dim),     Vec::Zero(dim)};
}

LiftedOperators::LiftedOperators(const Topology& topology, std::size_t selector, Eigen::Index dim) {
  const auto inc = build_incidence(topology);
  const auto n = inc.source.rows(), m = inc.source.cols();
  Mat stacked(2 * n, m);
  stacked << inc.source, inc.destination;
  a = kron_identity(stacked, dim);
  b = Mat::Zero(2 * n * dim, n * dim);
  b.topRows(n * dim).setIdentity();
  b.bottomRows(n * dim).setIdentity();
  Mat sel = Mat::Zero(m, 1);
  sel(static_cast<Eigen::Index>(selector), 0) = 1.0;
  s = kron_identity(sel, dim);
  es = kron_identity(inc.signed_inc, dim);
  eu = kron_identity(inc.unsigned_inc, dim);
  degrees = inc.degrees;
}

void admm_reference_step(AdmmReferenceState& ref, const LiftedOperators& ops, const Problem& problem,
                         const ModeAssignment& modes, std::uint64_t t) {
  const auto& hp = problem.hyper;
  const Eigen::Index d = problem.dim();
  const auto m = static_cast<Eigen::Index>(problem.graph().agents());
  const double mu_z = hp.mu_z, mu_t = hp.mu_theta;

  Vec y(ref.alpha.size() + ref.beta.size());
  y << ref.alpha, ref.beta;

  // x-step: x - (H^t)^{-1} grad_x L(x, z; y, lambda)
  Vec grad_f(m * d);
  Mat h = Mat::Zero(m * d, m * d);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto agent = static_cast<std::size_t>(i);
    const Vec xi = ref.x.segment(i * d, d);
    grad_f.segment(i * d, d) = problem.objective(agent).gradient(xi);
    const auto mode = modes.at(agent, t);
    auto block = h.block(i * d, i * d, d, d);
    if (mode == UpdateMode::Newton) block = problem.objective(agent).hessian(xi);
    block.diagonal().array() += mu_z * ops.degrees(i) + hp.delta(agent, mode);
  }
  h += mu_t * ops.s * ops.s.transpose();

  const Vec residual = ops.a * ref.x - ops.b * ref.z;
  const Vec sel_gap = ops.s.transpose() * ref.x - ref.theta;
  const Vec grad_l = grad_f + ops.a.transpose() * y + ops.s * ref.lambda +
                     mu_z * ops.a.transpose() * residual + mu_t * ops.s * sel_gap;
  ref.x -= h.llt().solve(grad_l);

  // z-step: B^T y + mu_z B^T (A x - B z) = 0
  const Mat btb = ops.b.transpose() * ops.b;
  const Vec rhs = ops.b.transpose() * y / mu_z + ops.b.transpose() * (ops.a * ref.x);
  ref.z = btb.ldlt().solve(rhs);

  // theta-step
  ref.theta = problem.regularizer.prox(ops.s.transpose() * ref.x + ref.lambda / mu_t, mu_t);

  // dual ascent
  y += mu_z * (ops.a * ref.x - ops.b * ref.z);
  const auto n_d = ref.alpha.size();
  ref.alpha = y.head(n_d);
  ref.beta = y.tail(n_d);
  ref.lambda += mu_t * (ops.s.transpose() * ref.x - ref.theta);
}

}  // namespace hippo
