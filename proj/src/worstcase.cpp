#include "isac/worstcase.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "isac/certificates.hpp"
#include "isac/metrics.hpp"

namespace isac {

using conic::FeasibilityProblem;
using conic::HermExpr;
using conic::LinExpr;
using conic::VecExpr;

void psd_directions(const MatC& m, VecR& weights, MatC& dirs,
                    double rel_tol) {
  Eigen::SelfAdjointEigenSolver<MatC> es((m + m.adjoint()) / 2.0);
  const VecR ev = es.eigenvalues();
  const double top = std::max(ev.maxCoeff(), 0.0);
  std::vector<int> keep;
  for (int i = ev.size() - 1; i >= 0; --i)
    if (ev(i) > rel_tol * top && ev(i) > 0.0) keep.push_back(i);
  weights.resize(keep.size());
  dirs.resize(m.rows(), keep.size());
  for (size_t k = 0; k < keep.size(); ++k) {
    weights(k) = ev(keep[k]);
    dirs.col(k) = es.eigenvectors().col(keep[k]);
  }
}

void add_robust_quad_upper(FeasibilityProblem& p, const std::string& name,
                           const HermExpr& x, const VecC& center, double rad_sq,
                           const LinExpr& corner) {
  if (rad_sq == 0.0) {
    p.add_linear_ge(name, corner - quad_form(x, center));
    return;
  }
  const int mult = p.add_scalar_var(name + "_mult", true);
  const int mp = p.scalar_vars()[mult].offset;
  HermExpr negx = -1.0 * x;
  LinExpr c2 = corner - quad_form(x, center) - rad_sq * p.scalar_expr(mult);
  p.add_lmi(name, arrow(conic::scaled_identity(mp, x.dim) + negx,
                        apply_vec(negx, center), c2));
}

// The quadratic each scatterer contributes, Tr(F H Q H^H), depends on the
// perturbation of H only through its image on the weighted directions of
// the fixed factor (the combiner on the transmit side, the on-air
// covariance on the receive side). Projecting is exact: with unit
// directions u_r of weight d_r, the form becomes z^H (diag(d) kron
// Inner(x)) z for z the projected channel stack, and the joint ball maps
// onto the joint ball of the projections. A Schur complement then splits
// the single big certificate into per-scatterer bordered blocks whose free
// corners s_j are tied by one row, all sharing the multiplier.
void add_echo_floor(FeasibilityProblem& p, const std::string& tag,
                    const HermExpr& inner, const VecR& weights,
                    const std::vector<VecC>& centers, int self, double t,
                    double rad_sq, double noise) {
  if (!(t > 0.0)) throw InvalidInput("echo floor: t must be positive");
  const double scale = std::min(1.0, t);
  const int nsc = int(centers.size());
  if (weights.size() == 0) {
    // nothing on air: the floor is unreachable for any positive t
    p.add_linear_ge(tag + "_sum", LinExpr::constant(-scale * noise));
    return;
  }
  MatC wdiag = MatC::Zero(weights.size(), weights.size());
  for (int r = 0; r < weights.size(); ++r) wdiag(r, r) = weights(r);
  HermExpr lifted = kron_fixed_conj(wdiag, inner);

  if (rad_sq == 0.0) {
    LinExpr total = LinExpr::constant(-scale * noise);
    for (int j = 0; j < nsc; ++j) {
      const double cj = j == self ? -scale / t : scale;
      total += -cj * quad_form(lifted, centers[j]);
    }
    p.add_linear_ge(tag + "_sum", total);
    return;
  }

  const int mult = p.add_scalar_var(tag + "_mult", true);
  const int mp = p.scalar_vars()[mult].offset;
  LinExpr total =
      LinExpr::constant(-scale * noise) - rad_sq * p.scalar_expr(mult);
  for (int j = 0; j < nsc; ++j) {
    const double cj = j == self ? -scale / t : scale;
    HermExpr xj = cj * lifted;
    HermExpr negxj = -cj * lifted;
    const int sj = p.add_scalar_var(tag + "_s" + std::to_string(j), false);
    LinExpr cr = p.scalar_expr(sj) - quad_form(xj, centers[j]);
    p.add_lmi(tag + "_b" + std::to_string(j),
              arrow(conic::scaled_identity(mp, xj.dim) + negxj,
                    apply_vec(negxj, centers[j]), cr));
    total += -1.0 * p.scalar_expr(sj);
  }
  p.add_linear_ge(tag + "_sum", total);
}

std::vector<VecC> project_channels(const std::vector<MatC>& chans,
                                   const MatC& dirs, bool adjoint_side) {
  std::vector<VecC> out;
  out.reserve(chans.size());
  const int nd = int(dirs.cols());
  for (const MatC& h : chans) {
    const int sub = adjoint_side ? int(h.cols()) : int(h.rows());
    VecC z(sub * nd);
    for (int r = 0; r < nd; ++r)
      z.segment(r * sub, sub) =
          adjoint_side ? VecC(h.adjoint() * dirs.col(r)) : VecC(h * dirs.col(r));
    out.push_back(std::move(z));
  }
  return out;
}

namespace {

const BoundedErrors& bounded_budgets(const Scenario& s) {
  if (s.error_model.kind != ErrorModelKind::bounded || !s.error_model.bounded)
    throw InvalidInput("error_model: bounded budgets required");
  return *s.error_model.bounded;
}

}  // namespace

void add_rank_one_forcing(FeasibilityProblem& p, const std::string& tag,
                          int var, const MatC& anchor) {
  const auto& info = p.matrix_vars().at(var);
  const int n = info.dim;
  if (anchor.rows() != n || anchor.cols() != n)
    throw InvalidInput("rank-one forcing: anchor size mismatch");
  const int bv = p.add_matrix_var(tag + "_dir", n, true);
  const int vv = p.add_matrix_var(tag + "_excess", n, true);
  const int shift = p.add_scalar_var(tag + "_shift", false);
  const int sp = p.scalar_vars()[shift].offset;
  p.add_linear_eq(tag + "_dir_trace",
                  trace_expr(p.matrix_expr(bv)) - LinExpr::constant(1.0));
  p.add_lmi(tag + "_dom", p.matrix_expr(vv) - p.matrix_expr(var) +
                              conic::scaled_identity(sp, n));
  p.add_linear_ge(tag + "_gap",
                  frob_inner_expr(anchor, p.matrix_expr(bv)) -
                      2.0 * p.scalar_expr(shift) -
                      trace_expr(p.matrix_expr(vv)));
}

TxDesign TxProblem::extract(const VecR& x) const {
  TxDesign d;
  d.w.reserve(w_vars.size());
  for (int v : w_vars) d.w.push_back(prob.extract_matrix(v, x));
  d.r = prob.extract_matrix(r_var, x);
  return d;
}

RxDesign RxProblem::extract(const VecR& x) const {
  RxDesign d;
  for (int v : f_on_vars) d.f_on.push_back(prob.extract_matrix(v, x));
  for (int v : f_off_vars) d.f_off.push_back(prob.extract_matrix(v, x));
  return d;
}

TxProblem build_tx_problem_bounded(const Scenario& s, const ChannelSet& cs,
                                   const RxDesign& rx, double t,
                                   const std::vector<MatC>* w_anchors) {
  const BoundedErrors& be = bounded_budgets(s);
  const int k_users = int(s.users.size());
  const int n_t = int(cs.target_index.size());
  const int mt = s.geometry.m_tx;
  if (int(rx.f_on.size()) != n_t || int(rx.f_off.size()) != n_t)
    throw InvalidInput("tx problem: one combiner per target required");
  if (w_anchors && int(w_anchors->size()) != k_users)
    throw InvalidInput("tx problem: one anchor per user required");

  TxProblem out;
  FeasibilityProblem& p = out.prob;
  for (int k = 0; k < k_users; ++k)
    out.w_vars.push_back(p.add_matrix_var("w" + std::to_string(k), mt));
  out.r_var = p.add_matrix_var("r", mt);

  HermExpr q_on = p.matrix_expr(out.r_var);
  HermExpr q_off = q_on;
  HermExpr q_covert = HermExpr::zero(mt);
  for (int k = 0; k < k_users; ++k) {
    q_on = q_on + p.matrix_expr(out.w_vars[k]);
    if (s.users[k].kind == UserKind::overt)
      q_off = q_off + p.matrix_expr(out.w_vars[k]);
    else
      q_covert = q_covert + p.matrix_expr(out.w_vars[k]);
  }

  p.add_linear_ge("power", LinExpr::constant(s.power_budget) - trace_expr(q_on));

  // per-user quality floors; interference under covert transmission
  // dominates the quiet hypothesis, so one certificate per user suffices
  for (int k = 0; k < k_users; ++k) {
    const double gamma = s.users[k].sinr_target;
    HermExpr psi =
        (1.0 + gamma) * p.matrix_expr(out.w_vars[k]) + (-gamma) * q_on;
    add_robust_quad_upper(
        p, "comm" + std::to_string(k), -1.0 * psi, cs.comm[k], be.comm_sq[k],
        LinExpr::constant(-gamma * s.users[k].noise_power));
  }

  // detectability ceilings, one per warden
  const double eta = solve_eta(s.covertness_eps, s.blocklength);
  for (int i = 0; i < n_t; ++i) {
    const Scatterer& sc = s.scatterers[cs.target_index[i]];
    HermExpr xi = q_covert - eta * q_off;
    add_robust_quad_upper(p, "covert" + std::to_string(i), xi, cs.warden[i],
                          be.warden_sq[i],
                          LinExpr::constant(eta * sc.warden_noise));
  }

  // echo floors, both hypotheses, compressed onto each combiner's range
  for (int i = 0; i < n_t; ++i) {
    for (int hyp = 0; hyp < 2; ++hyp) {
      const MatC& f = hyp == 0 ? rx.f_on[i] : rx.f_off[i];
      VecR weights;
      MatC dirs;
      psd_directions(f, weights, dirs);
      std::vector<VecC> centers = project_channels(cs.radar, dirs, true);
      add_echo_floor(p,
                     "radar" + std::to_string(i) + (hyp == 0 ? "_on" : "_off"),
                     hyp == 0 ? q_on : q_off, weights, centers,
                     cs.target_index[i], t, be.radar_sq, s.radar_noise);
    }
  }

  if (w_anchors)
    for (int k = 0; k < k_users; ++k)
      add_rank_one_forcing(p, "lift_w" + std::to_string(k), out.w_vars[k],
                           (*w_anchors)[k]);
  return out;
}

RxProblem build_rx_problem_bounded(const Scenario& s, const ChannelSet& cs,
                                   const TxDesign& tx, double t,
                                   const RxDesign* f_anchors) {
  const BoundedErrors& be = bounded_budgets(s);
  const int n_t = int(cs.target_index.size());
  const int mr = s.geometry.m_rx;
  if (f_anchors && (int(f_anchors->f_on.size()) != n_t ||
                    int(f_anchors->f_off.size()) != n_t))
    throw InvalidInput("rx problem: one anchor per target required");

  RxProblem out;
  FeasibilityProblem& p = out.prob;
  for (int i = 0; i < n_t; ++i)
    out.f_on_vars.push_back(p.add_matrix_var("f_on" + std::to_string(i), mr));
  for (int i = 0; i < n_t; ++i)
    out.f_off_vars.push_back(p.add_matrix_var("f_off" + std::to_string(i), mr));

  for (int hyp = 0; hyp < 2; ++hyp) {
    MatC q = tx_covariance(s, tx, hyp == 0 ? Hyp::on : Hyp::off);
    VecR weights;
    MatC dirs;
    psd_directions(q, weights, dirs);
    std::vector<VecC> centers = project_channels(cs.radar, dirs, false);
    for (int i = 0; i < n_t; ++i) {
      const int fv = hyp == 0 ? out.f_on_vars[i] : out.f_off_vars[i];
      p.add_linear_eq((hyp == 0 ? "f_on" : "f_off") + std::to_string(i) +
                          "_trace",
                      trace_expr(p.matrix_expr(fv)) - LinExpr::constant(1.0));
      add_echo_floor(p,
                     "radar" + std::to_string(i) + (hyp == 0 ? "_on" : "_off"),
                     p.matrix_expr(fv), weights, centers, cs.target_index[i],
                     t, be.radar_sq, s.radar_noise);
    }
  }

  if (f_anchors)
    for (int i = 0; i < n_t; ++i) {
      add_rank_one_forcing(p, "lift_f_on" + std::to_string(i),
                           out.f_on_vars[i], f_anchors->f_on[i]);
      add_rank_one_forcing(p, "lift_f_off" + std::to_string(i),
                           out.f_off_vars[i], f_anchors->f_off[i]);
    }
  return out;
}

}  // namespace isac
