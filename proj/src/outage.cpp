#include "isac/outage.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>

#include "isac/metrics.hpp"

namespace isac {

using conic::FeasibilityProblem;
using conic::HermExpr;
using conic::LinExpr;
using conic::VecExpr;

namespace {

const ProbabilisticErrors& probabilistic_budgets(const Scenario& s) {
  if (s.error_model.kind != ErrorModelKind::probabilistic ||
      !s.error_model.probabilistic)
    throw InvalidInput("error_model: probabilistic covariances required");
  return *s.error_model.probabilistic;
}

void check_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0))
    throw InvalidInput("chance constraint: rho must lie in (0,1)");
}

// Hermitian square root with eigenvalues in [-1e-12, 0) clipped to zero;
// more negative means the covariance is not PSD.
MatC psd_sqrt(const MatC& e, const char* what) {
  Eigen::SelfAdjointEigenSolver<MatC> es((e + e.adjoint()) / 2.0);
  VecR lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-12 * scale)
      throw InvalidInput(std::string(what) +
                         ": covariance is not positive semidefinite");
    lam(i) = std::sqrt(std::max(0.0, lam(i)));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

// A covariance proportional to the identity factors along the Kronecker
// structure of the echo blocks; detect that and report the per-entry level.
bool white_level(const MatC& e, double& level) {
  const int n = int(e.rows());
  level = e.trace().real() / n;
  return (e - level * MatC::Identity(n, n)).norm() <=
         1e-12 * std::sqrt(double(n)) * std::max(1.0, level);
}

double top_eigenvalue(const MatC& m) {
  Eigen::SelfAdjointEigenSolver<MatC> es((m + m.adjoint()) / 2.0);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

// One chance constraint under assembly. The deviation terms of every block
// feed a single norm cone bounded by x, the curvature of every block is
// dominated by the shared shift y, and finish() emits the cone plus the
// scalar condition  trace + s - sqrt(2 ln(1/rho)) x + ln(rho) y >= 0.
struct ChanceRows {
  FeasibilityProblem& p;
  std::string tag;
  int xv, yv;
  std::vector<LinExpr> rows;
  int n_dom = 0;

  ChanceRows(FeasibilityProblem& p_, const std::string& tag_)
      : p(p_), tag(tag_) {
    xv = p.add_scalar_var(tag + "_x", true);
    yv = p.add_scalar_var(tag + "_y", true);
  }

  // Frobenius rows of a Hermitian block, optionally prescaled.
  void add_herm_rows(const HermExpr& a, double scale = 1.0) {
    const double rt2 = std::sqrt(2.0) * scale;
    for (int i = 0; i < a.dim; ++i)
      rows.push_back(scale * herm_entry_re(a, i, i));
    for (int j = 1; j < a.dim; ++j)
      for (int i = 0; i < j; ++i) {
        rows.push_back(rt2 * herm_entry_re(a, i, j));
        rows.push_back(rt2 * herm_entry_im(a, i, j));
      }
  }

  // sqrt(2) times the linear-term vector of a block.
  void add_vec_rows(const VecExpr& b) {
    const double rt2 = std::sqrt(2.0);
    for (int i = 0; i < b.dim; ++i) {
      rows.push_back(rt2 * vec_entry_re(b, i));
      rows.push_back(rt2 * vec_entry_im(b, i));
    }
  }

  void add_dom_lmi(const HermExpr& a) {
    const int yp = p.scalar_vars()[yv].offset;
    p.add_lmi(tag + "_dom" + std::to_string(n_dom++),
              conic::scaled_identity(yp, a.dim) + a);
  }

  void add_dom_row(const LinExpr& bound) {  // y >= bound
    p.add_linear_ge(tag + "_dom" + std::to_string(n_dom++),
                    p.scalar_expr(yv) - bound);
  }

  void finish(const LinExpr& trace_plus_s, double rho) {
    const double sq = std::sqrt(2.0 * std::log(1.0 / rho));
    if (!rows.empty()) p.add_soc(tag + "_norm", std::move(rows), p.scalar_expr(xv));
    p.add_linear_ge(tag + "_bern", trace_plus_s - sq * p.scalar_expr(xv) +
                                       std::log(rho) * p.scalar_expr(yv));
  }
};

}  // namespace

void add_bernstein_ge(FeasibilityProblem& p, const std::string& tag,
                      const std::vector<std::pair<HermExpr, VecExpr>>& blocks,
                      const LinExpr& s, double rho) {
  check_rho(rho);
  ChanceRows acc(p, tag);
  LinExpr lin = s;
  for (const auto& [a, b] : blocks) {
    acc.add_herm_rows(a);
    acc.add_vec_rows(b);
    acc.add_dom_lmi(a);
    lin += trace_expr(a);
  }
  acc.finish(lin, rho);
}

TxProblem build_tx_problem_outage(const Scenario& s, const ChannelSet& cs,
                                  const RxDesign& rx, double t,
                                  const std::vector<MatC>* w_anchors) {
  const ProbabilisticErrors& pe = probabilistic_budgets(s);
  check_rho(s.outage.rho_c);
  check_rho(s.outage.rho_w);
  if (!(t > 0.0)) throw InvalidInput("echo floor: t must be positive");
  const int k_users = int(s.users.size());
  const int n_t = int(cs.target_index.size());
  const int mt = s.geometry.m_tx;
  const int mr = s.geometry.m_rx;
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

  // per-user quality floors, each missed with probability at most rho_c
  for (int k = 0; k < k_users; ++k) {
    const double gamma = s.users[k].sinr_target;
    HermExpr psi =
        (1.0 + gamma) * p.matrix_expr(out.w_vars[k]) + (-gamma) * q_on;
    const MatC es = psd_sqrt(pe.comm_cov[k], "comm error");
    add_bernstein_ge(
        p, "comm" + std::to_string(k),
        {{congruence(es, psi), mat_vec(es, apply_vec(psi, cs.comm[k]))}},
        quad_form(psi, cs.comm[k]) +
            LinExpr::constant(-gamma * s.users[k].noise_power),
        s.outage.rho_c);
  }

  // detectability ceilings; the exposure is bounded above, so the event
  // enters the concentration bound with its sign flipped
  const double eta = solve_eta(s.covertness_eps, s.blocklength);
  for (int i = 0; i < n_t; ++i) {
    const Scatterer& sc = s.scatterers[cs.target_index[i]];
    HermExpr nxi = eta * q_off - q_covert;
    const MatC ew = psd_sqrt(pe.warden_cov[i], "warden error");
    add_bernstein_ge(
        p, "covert" + std::to_string(i),
        {{congruence(ew, nxi), mat_vec(ew, apply_vec(nxi, cs.warden[i]))}},
        quad_form(nxi, cs.warden[i]) +
            LinExpr::constant(eta * sc.warden_noise),
        s.outage.rho_w);
  }

  // echo floors, both hypotheses, one chance constraint each; the blocks
  // are per-scatterer, and white error covariance factors each block along
  // the Kronecker product so every row stays at the antenna dimension
  check_rho(s.outage.rho_r);
  const double scale = std::min(1.0, t);
  const int nsc = int(cs.radar.size());
  int qmax_var[2] = {-1, -1};
  auto qmax_expr = [&](int hyp) {
    if (qmax_var[hyp] < 0) {
      const std::string nm = hyp == 0 ? "qmax_on" : "qmax_off";
      qmax_var[hyp] = p.add_scalar_var(nm, true);
      const int up = p.scalar_vars()[qmax_var[hyp]].offset;
      p.add_lmi(nm + "_dom", conic::scaled_identity(up, mt) +
                                 -1.0 * (hyp == 0 ? q_on : q_off));
    }
    return p.scalar_expr(qmax_var[hyp]);
  };
  for (int i = 0; i < n_t; ++i)
    for (int hyp = 0; hyp < 2; ++hyp) {
      const MatC& f = hyp == 0 ? rx.f_on[i] : rx.f_off[i];
      const HermExpr& q = hyp == 0 ? q_on : q_off;
      const std::string tag =
          "radar" + std::to_string(i) + (hyp == 0 ? "_on" : "_off");
      const double fnorm = f.norm();
      const double ftr = f.trace().real();
      const double fmax = top_eigenvalue(f);
      ChanceRows acc(p, tag);
      LinExpr lin = LinExpr::constant(-scale * s.radar_noise);
      for (int j = 0; j < nsc; ++j) {
        const double cj = j == cs.target_index[i] ? -scale / t : scale;
        lin += -cj * frob_inner_expr(
                         MatC(cs.radar[j].adjoint() * f * cs.radar[j]), q);
        const MatC& ej = pe.radar_cov_blocks[j];
        double lvl;
        if (white_level(ej, lvl)) {
          if (lvl <= 0.0) continue;
          acc.add_herm_rows(q, lvl * std::abs(cj) * fnorm);
          const MatC fg = (-cj * std::sqrt(lvl)) * (f * cs.radar[j]);
          for (int col = 0; col < mt; ++col)
            acc.add_vec_rows(mat_vec(fg, apply_vec(q, VecC::Unit(mt, col))));
          lin += (-cj * lvl * ftr) * trace_expr(q);
          // curvature is a spectral product; the self term only adds
          // positive curvature and needs no shift
          if (cj > 0.0 && lvl * cj * fmax > 0.0)
            acc.add_dom_row((lvl * cj * fmax) * qmax_expr(hyp));
        } else {
          const MatC es = psd_sqrt(ej, "radar error");
          const HermExpr xj = (-cj) * kron_conj_fixed(q, f);
          const HermExpr aj = congruence(es, xj);
          const Eigen::Map<const VecC> gj(cs.radar[j].data(), mr * mt);
          acc.add_herm_rows(aj);
          acc.add_vec_rows(mat_vec(es, apply_vec(xj, gj)));
          acc.add_dom_lmi(aj);
          lin += trace_expr(aj);
        }
      }
      acc.finish(lin, s.outage.rho_r);
    }

  if (w_anchors)
    for (int k = 0; k < k_users; ++k)
      add_rank_one_forcing(p, "lift_w" + std::to_string(k), out.w_vars[k],
                           (*w_anchors)[k]);
  return out;
}

RxProblem build_rx_problem_outage(const Scenario& s, const ChannelSet& cs,
                                  const TxDesign& tx, double t,
                                  const RxDesign* f_anchors) {
  const ProbabilisticErrors& pe = probabilistic_budgets(s);
  check_rho(s.outage.rho_r);
  if (!(t > 0.0)) throw InvalidInput("echo floor: t must be positive");
  const int n_t = int(cs.target_index.size());
  const int mt = s.geometry.m_tx;
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

  const double scale = std::min(1.0, t);
  const int nsc = int(cs.radar.size());
  for (int hyp = 0; hyp < 2; ++hyp) {
    const MatC q = tx_covariance(s, tx, hyp == 0 ? Hyp::on : Hyp::off);
    const double qnorm = q.norm();
    const double qtr = q.trace().real();
    const double qmax = top_eigenvalue(q);
    // the chance conditions are positively homogeneous in the event, so
    // dividing each constraint by the fixed covariance magnitude only
    // rescales its private x,y pair and keeps the rows well conditioned
    const double inv = 1.0 / std::max(1.0, qnorm);
    for (int i = 0; i < n_t; ++i) {
      const int fv = hyp == 0 ? out.f_on_vars[i] : out.f_off_vars[i];
      p.add_linear_eq((hyp == 0 ? "f_on" : "f_off") + std::to_string(i) +
                          "_trace",
                      trace_expr(p.matrix_expr(fv)) - LinExpr::constant(1.0));
      const HermExpr fe = p.matrix_expr(fv);
      const std::string tag =
          "radar" + std::to_string(i) + (hyp == 0 ? "_on" : "_off");
      ChanceRows acc(p, tag);
      int fmax_var = -1;
      auto fmax_expr = [&]() {
        if (fmax_var < 0) {
          fmax_var = p.add_scalar_var(tag + "_fmax", true);
          const int up = p.scalar_vars()[fmax_var].offset;
          p.add_lmi(tag + "_fmax_dom",
                    conic::scaled_identity(up, mr) + -1.0 * fe);
        }
        return p.scalar_expr(fmax_var);
      };
      LinExpr lin = LinExpr::constant(-inv * scale * s.radar_noise);
      for (int j = 0; j < nsc; ++j) {
        const double cj =
            inv * (j == cs.target_index[i] ? -scale / t : scale);
        lin += -cj * frob_inner_expr(
                         MatC(cs.radar[j] * q * cs.radar[j].adjoint()), fe);
        const MatC& ej = pe.radar_cov_blocks[j];
        double lvl;
        if (white_level(ej, lvl)) {
          if (lvl <= 0.0) continue;
          acc.add_herm_rows(fe, lvl * std::abs(cj) * qnorm);
          const MatC gq = (-cj * std::sqrt(lvl)) * (cs.radar[j] * q);
          for (int col = 0; col < mt; ++col)
            acc.add_vec_rows(apply_vec(fe, gq.col(col)));
          lin += (-cj * lvl * qtr) * trace_expr(fe);
          if (cj > 0.0 && lvl * cj * qmax > 0.0)
            acc.add_dom_row((lvl * cj * qmax) * fmax_expr());
        } else {
          const MatC es = psd_sqrt(ej, "radar error");
          const HermExpr xj = (-cj) * kron_fixed_conj(q, fe);
          const HermExpr aj = congruence(es, xj);
          const Eigen::Map<const VecC> gj(cs.radar[j].data(), mr * mt);
          acc.add_herm_rows(aj);
          acc.add_vec_rows(mat_vec(es, apply_vec(xj, gj)));
          acc.add_dom_lmi(aj);
          lin += trace_expr(aj);
        }
      }
      acc.finish(lin, s.outage.rho_r);
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
