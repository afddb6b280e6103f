#pragma once

#include <string>
#include <vector>

#include "isac/conic.hpp"
#include "isac/types.hpp"

namespace isac {

/// Eigendirections of a PSD matrix whose weights exceed rel_tol times the
/// largest, returned descending. Dropping the trailing weights keeps the
/// certificate blocks as small as the matrix's effective rank.
void psd_directions(const MatC& m, VecR& weights, MatC& dirs,
                    double rel_tol = 1e-10);

/// Per-scatterer channel stacks z = [A u_1; A u_2; ...] over the direction
/// columns u_r (adjoint_side applies A^H instead of A).
std::vector<VecC> project_channels(const std::vector<MatC>& chans,
                                   const MatC& dirs, bool adjoint_side);

/// Certificate for sup over ||e||^2 <= rad_sq of (c+e)^H X(x) (c+e)
/// <= corner(x): one nonnegative multiplier and one bordered block. Lossless
/// for a single ball. A zero radius degenerates to the scalar inequality.
void add_robust_quad_upper(conic::FeasibilityProblem& p,
                           const std::string& name, const conic::HermExpr& x,
                           const VecC& center, double rad_sq,
                           const conic::LinExpr& corner);

/// Echo-SINR floor t for one target: the quadratic forms of all scatterers,
/// weighted +1 away from the target and -1/t on it (pre-scaled by min(1,t)),
/// must stay below -min(1,t)*noise for every joint perturbation in the
/// stacked ball of squared radius rad_sq. Split into per-scatterer bordered
/// blocks sharing one multiplier, with free corner slacks tied by one row.
/// `inner` is the variable factor (on-air covariance or combiner), `weights`
/// and `centers` the fixed factor's directions and the channels projected
/// onto them, `self` the target's scatterer position.
void add_echo_floor(conic::FeasibilityProblem& p, const std::string& tag,
                    const conic::HermExpr& inner, const VecR& weights,
                    const std::vector<VecC>& centers, int self, double t,
                    double rad_sq, double noise);

}  // namespace isac
