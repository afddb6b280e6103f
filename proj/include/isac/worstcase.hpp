#pragma once

#include <vector>

#include "isac/conic.hpp"
#include "isac/metrics.hpp"
#include "isac/scenario.hpp"

namespace isac {

/// Transmit-side feasibility problem: user covariances plus the sensing
/// covariance, with handles for pulling the design back out of a solution.
struct TxProblem {
  conic::FeasibilityProblem prob;
  std::vector<int> w_vars;
  int r_var = -1;
  TxDesign extract(const VecR& x) const;
};

/// Receive-side feasibility problem: per-target combiner matrices under
/// each hypothesis, unit trace each.
struct RxProblem {
  conic::FeasibilityProblem prob;
  std::vector<int> f_on_vars, f_off_vars;
  RxDesign extract(const VecR& x) const;
};

/// Rank-one forcing constraints for a registered matrix variable, anchored
/// at the previous iterate. At a fixed point of the anchor sequence they
/// admit a solution iff the second eigenvalue is nonpositive: the bound
/// lambda_max(anchor) >= 2v + Tr(V) with V >= M - vI squeezes out
/// lambda1(M) + lambda2(M) when v is chosen optimally.
void add_rank_one_forcing(conic::FeasibilityProblem& p, const std::string& tag,
                          int var, const MatC& anchor);

/// Transmit design feasibility at echo-SINR floor t with the receive side
/// held fixed, robust to norm-ball channel errors. Quadratic uncertainty is
/// certified by multiplier matrices; the stacked sensing-channel ball is
/// split exactly into per-scatterer blocks sharing one multiplier, after
/// compressing each block onto the column space of the fixed combiner.
/// `w_anchors` (one per user) turns on rank-one forcing of the user
/// covariances around the given matrices.
TxProblem build_tx_problem_bounded(const Scenario& s, const ChannelSet& cs,
                                   const RxDesign& rx, double t,
                                   const std::vector<MatC>* w_anchors = nullptr);

/// Receive combiner feasibility at echo-SINR floor t with the transmit side
/// held fixed. Same certificate structure, compressed onto the column space
/// of the on-air covariance. `f_anchors` turns on rank-one forcing of the
/// combiners around the given design.
RxProblem build_rx_problem_bounded(const Scenario& s, const ChannelSet& cs,
                                   const TxDesign& tx, double t,
                                   const RxDesign* f_anchors = nullptr);

}  // namespace isac
