#pragma once

#include <utility>
#include <vector>

#include "isac/worstcase.hpp"

namespace isac {

/// Sufficient conic conditions for the Gaussian chance constraint
/// Pr{ e^H A e + 2 Re(b^H e) + s >= 0 } >= 1 - rho with e standard complex
/// normal (Bernstein-type concentration): one linear row, one norm cone over
/// the entries of A and sqrt(2) b, and a spectral dominance LMI per block,
/// sharing two nonnegative auxiliaries. Several (A, b) blocks model a
/// block-diagonal A over independent error components.
void add_bernstein_ge(
    conic::FeasibilityProblem& p, const std::string& tag,
    const std::vector<std::pair<conic::HermExpr, conic::VecExpr>>& blocks,
    const conic::LinExpr& s, double rho);

/// Transmit design feasibility at echo-SINR floor t with the receive side
/// held fixed, under Gaussian channel error with per-constraint outage
/// rates. Whitened quadratic events go through the concentration bound; for
/// white radar error blocks the Kronecker structure is factored so the norm
/// and spectral rows stay at the antenna dimension instead of its square.
TxProblem build_tx_problem_outage(const Scenario& s, const ChannelSet& cs,
                                  const RxDesign& rx, double t,
                                  const std::vector<MatC>* w_anchors = nullptr);

/// Receive combiner feasibility at echo-SINR floor t with the transmit side
/// held fixed, same chance-constraint treatment of the echo floors.
RxProblem build_rx_problem_outage(const Scenario& s, const ChannelSet& cs,
                                  const TxDesign& tx, double t,
                                  const RxDesign* f_anchors = nullptr);

}  // namespace isac
