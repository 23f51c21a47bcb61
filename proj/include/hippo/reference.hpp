#pragma once

#include <cstdint>

#include "hippo/protocol.hpp"

namespace hippo {

/// Full five-variable ADMM iterate on the lifted problem: x (m blocks),
/// z (n blocks), y = [alpha; beta] (2n blocks), theta, lambda. Stacked vectors.
struct AdmmReferenceState {
  Vec x;
  Vec z;
  Vec alpha;
  Vec beta;
  Vec theta;
  Vec lambda;

  static AdmmReferenceState zeros(std::size_t agents, std::size_t edges, Eigen::Index dim);

  Vec block_x(std::size_t i, Eigen::Index dim) const { return x.segment(static_cast<Eigen::Index>(i) * dim, dim); }
};

/// Dense lifted operators (Kronecker product with I_d made explicit).
struct LiftedOperators {
  Mat a;  // [A_s; A_d] (x) I_d, 2nd x md
  Mat b;  // [I; I], 2nd x nd
  Mat s;  // s_l (x) I_d, md x d
  Mat es; // E_s (x) I_d
  Mat eu; // E_u (x) I_d
  Vec degrees;

  LiftedOperators(const Topology& topology, std::size_t selector, Eigen::Index dim);
};

/// Linearized x-step with H^t = J^t + mu_z D + mu_theta S S^T + Delta, exact
/// z-minimization, theta prox, then dual ascent on y and lambda. Works on the
/// lifted dense matrices and never uses the reduced phi form.
void admm_reference_step(AdmmReferenceState& ref, const LiftedOperators& ops, const Problem& problem,
                         const ModeAssignment& modes, std::uint64_t t);

}  // namespace hippo
