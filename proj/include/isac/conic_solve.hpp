#pragma once

#include "isac/conic.hpp"

namespace isac::conic {

enum class SolveStatus { feasible, infeasible, solver_failure };

struct SolveTolerances {
  double feas = 1e-8;       // interior-point residual target
  double verify = 1e-7;     // independent re-check tolerance (10x looser)
  int max_iters = 100;
  bool want_assignment = true;
};

struct SolveStats {
  int iterations = 0;
  double mu = 0.0;            // final complementarity measure
  double primal_resid = 0.0;  // at the returned assignment, normalized
  double cert_resid = 0.0;    // dual-ray equation residual, normalized
  double tau = 0.0, kappa = 0.0;
};

struct FeasibilityOutcome {
  SolveStatus status = SolveStatus::solver_failure;
  VecR x;                    // satisfying assignment (feasible only)
  ResidualReport residuals;  // independent re-check of x
  double margin = 0.0;       // residuals.worst()
  double cert_objective = 0.0;  // Farkas gap -(h'z + b'y) > 0 (infeasible only)
  SolveStats stats;

  bool feasible() const { return status == SolveStatus::feasible; }
};

/// Decides feasibility of the constraint system with a homogeneous self-dual
/// interior-point method over the embedded real cones (Nesterov-Todd scaled,
/// Mehrotra predictor-corrector). A `feasible` outcome always carries an
/// assignment that passed the independent dense re-check at the verify
/// tolerance; `infeasible` carries a normalized Farkas certificate residual.
/// Iteration exhaustion or numerical stall yields `solver_failure`.
FeasibilityOutcome check_feasibility(const FeasibilityProblem& p,
                                     const SolveTolerances& tol = {});

}  // namespace isac::conic
