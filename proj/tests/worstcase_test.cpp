#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "isac/certificates.hpp"
#include "isac/conic_solve.hpp"
#include "isac/metrics.hpp"
#include "isac/scenario.hpp"
#include "isac/worstcase.hpp"

using namespace isac;

namespace {

MatC random_hermitian(std::mt19937_64& g, int n, double scale) {
  std::normal_distribution<double> nd;
  MatC a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cxd(nd(g), nd(g));
  return scale * (a + a.adjoint()) / 2.0;
}

MatC random_psd(std::mt19937_64& g, int n, double scale) {
  std::normal_distribution<double> nd;
  MatC a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cxd(nd(g), nd(g));
  return scale * (a * a.adjoint()) / n;
}

VecC random_vec(std::mt19937_64& g, int n) {
  std::normal_distribution<double> nd;
  VecC v(n);
  for (int i = 0; i < n; ++i) v(i) = cxd(nd(g), nd(g));
  return v;
}

// Exact maximizer of (c+d)^T A (c+d) over ||d|| <= r via the secular
// equation: d(mu) = (mu I - A)^{-1} A c has decreasing norm for mu above
// the top eigenvalue; walk mu down to the radius.
double ball_quad_max_real(const MatR& a, const VecR& c, double r) {
  Eigen::SelfAdjointEigenSolver<MatR> es(a);
  const VecR ev = es.eigenvalues();
  const double lmax = ev.maxCoeff();
  const VecR g = es.eigenvectors().transpose() * (a * c);
  auto norm_at = [&](double mu) {
    double s = 0.0;
    for (int i = 0; i < ev.size(); ++i) {
      const double di = g(i) / (mu - ev(i));
      s += di * di;
    }
    return std::sqrt(s);
  };
  auto value_at = [&](const VecR& d) {
    VecR z = c + d;
    return z.dot(a * z);
  };
  const double scl = std::max(1.0, std::abs(lmax));
  double lo = lmax + 1e-12 * scl;
  if (norm_at(lo) < r) {
    // interior-or-degenerate side: either the form is concave enough that
    // the unconstrained top is inside, or the gradient is orthogonal to
    // the leading eigenspace and the boundary needs a top-direction kick
    VecR d = es.eigenvectors() * (g.array() / (lo - ev.array())).matrix();
    double best = value_at(d);
    const double slack = r * r - d.squaredNorm();
    if (slack > 0) {
      VecR dplus = d + std::sqrt(slack) * es.eigenvectors().col(ev.size() - 1);
      VecR dminus = d - std::sqrt(slack) * es.eigenvectors().col(ev.size() - 1);
      best = std::max({best, value_at(dplus), value_at(dminus)});
    }
    if (lmax <= 0.0 && c.norm() <= r) best = std::max(best, 0.0);
    return best;
  }
  double hi = lmax + std::max(1.0, (a * c).norm() / r) * (1 + scl);
  while (norm_at(hi) > r) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (norm_at(mid) > r ? lo : hi) = mid;
  }
  const double mu = 0.5 * (lo + hi);
  VecR d = es.eigenvectors() * (g.array() / (mu - ev.array())).matrix();
  if (d.norm() > 1e-12) d *= r / d.norm();
  return value_at(d);
}

// complex ball version through the real embedding
double ball_quad_max(const MatC& x, const VecC& z, double r) {
  MatR a = conic::embed_complex(x);
  VecR c(2 * z.size());
  c << z.real(), z.imag();
  return ball_quad_max_real(a, c, r);
}

bool cert_feasible(const MatC& x, const VecC& z, double rad_sq, double corner) {
  conic::FeasibilityProblem p;
  add_robust_quad_upper(p, "cap", conic::HermExpr::constant(x), z, rad_sq,
                        conic::LinExpr::constant(corner));
  return check_feasibility(p).feasible();
}

double second_ratio(const MatC& m) {
  Eigen::SelfAdjointEigenSolver<MatC> es(m);
  const VecR ev = es.eigenvalues();
  const int n = int(ev.size());
  return std::max(0.0, ev(n - 2)) / std::max(ev(n - 1), 1e-300);
}

MatC rank_one_project(const MatC& m) {
  Eigen::SelfAdjointEigenSolver<MatC> es(m);
  const int n = int(m.rows());
  const double l1 = std::max(0.0, es.eigenvalues()(n - 1));
  const VecC u = es.eigenvectors().col(n - 1);
  return l1 * u * u.adjoint();
}

Scenario bounded_default(double kappa) {
  Scenario s = default_scenario();
  ErrorBudgetPair b = derive_error_budgets(s, kappa);
  s.error_model.kappa = kappa;
  s.error_model.bounded = b.bounded;
  s.error_model.probabilistic = b.probabilistic;
  return s;
}

RxDesign flat_rx(int n_targets, int mr) {
  RxDesign rx;
  rx.f_on.assign(n_targets, MatC::Identity(mr, mr) / mr);
  rx.f_off = rx.f_on;
  return rx;
}

// worst sampled metrics over a mix of boundary and interior error draws
struct SampledWorst {
  double comm = 1e300;
  double covert_gap = -1e300;  // lhs - rhs, should stay <= 0
  double radar = 1e300;
};
SampledWorst sample_worst(const Scenario& s, const ChannelSet& cs,
                          const TxDesign& tx, const RxDesign& rx, int n_draws) {
  SampledWorst w;
  const double eta = solve_eta(s.covertness_eps, s.blocklength);
  for (int d = 0; d < n_draws; ++d) {
    ErrorDraw e = sample_error(s, ErrorModelKind::bounded, d,
                               d % 2 ? SampleMode::boundary : SampleMode::interior);
    ChannelSet pert = apply_error(cs, e);
    for (size_t k = 0; k < s.users.size(); ++k)
      w.comm = std::min(w.comm, comm_sinr(s, tx, int(k), pert.comm[k], Hyp::on) /
                                    s.users[k].sinr_target);
    for (size_t i = 0; i < cs.target_index.size(); ++i) {
      const auto& sc = s.scatterers[cs.target_index[i]];
      CovertnessMetrics cm =
          covertness_metrics(s, tx, pert.warden[i], sc.warden_noise, eta);
      w.covert_gap = std::max(w.covert_gap, cm.lhs - cm.rhs);
      for (Hyp hyp : {Hyp::on, Hyp::off})
        w.radar = std::min(w.radar,
                           radar_sinr(s, tx, rx, pert.radar, int(i), hyp));
    }
  }
  return w;
}

}  // namespace

TEST_CASE("ball certificate matches the exact quadratic maximum") {
  std::mt19937_64 g(31);
  int hits = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + int(trial % 2);
    MatC x = random_hermitian(g, n, 1.0);
    VecC z = random_vec(g, n);
    const double r = 0.3 + 0.2 * (trial % 4);
    const double sup = ball_quad_max(x, z, r);
    const double pad = 1e-4 * (1.0 + std::abs(sup));
    CHECK(cert_feasible(x, z, r * r, sup + pad));
    CHECK(!cert_feasible(x, z, r * r, sup - pad));
    ++hits;
  }
  CHECK(hits == 25);
}

TEST_CASE("ball certificate, zero radius, is the nominal inequality") {
  std::mt19937_64 g(77);
  MatC x = random_hermitian(g, 3, 1.0);
  VecC z = random_vec(g, 3);
  const double v = (z.adjoint() * x * z)(0).real();
  CHECK(cert_feasible(x, z, 0.0, v + 1e-9));
  CHECK(!cert_feasible(x, z, 0.0, v - 1e-6));
}

TEST_CASE("projected echo quadratic equals the direct one") {
  std::mt19937_64 g(13);
  const int mt = 4, mr = 3;
  for (int trial = 0; trial < 30; ++trial) {
    MatC f = random_psd(g, mr, 1.0);
    if (trial % 3 == 0) {  // exercise a hard rank-one factor too
      VecC u = random_vec(g, mr);
      f = u * u.adjoint();
    }
    MatC q = random_psd(g, mt, 2.0);
    MatC h = random_vec(g, mr) * random_vec(g, mt).adjoint();
    MatC delta(mr, mt);
    std::normal_distribution<double> nd;
    for (int i = 0; i < mr; ++i)
      for (int j = 0; j < mt; ++j) delta(i, j) = 0.1 * cxd(nd(g), nd(g));
    const MatC ht = h + delta;
    const double direct = (f * ht * q * ht.adjoint()).trace().real();

    VecR weights;
    MatC dirs;
    psd_directions(f, weights, dirs);
    std::vector<VecC> z = project_channels({h}, dirs, true);
    std::vector<VecC> dz = project_channels({delta}, dirs, true);
    double proj = 0.0;
    for (int r = 0; r < weights.size(); ++r) {
      VecC zr = z[0].segment(r * mt, mt) + dz[0].segment(r * mt, mt);
      proj += weights(r) * (zr.adjoint() * q * zr)(0).real();
    }
    CHECK(proj == doctest::Approx(direct).epsilon(1e-9));

    // and the projected perturbation never exceeds the original budget
    double pnorm = 0.0;
    for (const VecC& v : dz) pnorm += v.squaredNorm();
    CHECK(pnorm <= delta.squaredNorm() * (1 + 1e-12));
  }
}

// A flat combiner cannot separate the two targets: each echo interferes
// with the other, so floors must sit below the symmetric ceiling ~1.
TEST_CASE("transmit problem, zero budgets, meets nominal metrics") {
  Scenario s = bounded_default(0.0);
  ChannelSet cs = build_channels(s);
  RxDesign rx = flat_rx(2, 6);
  const double t = 0.8;
  TxProblem tp = build_tx_problem_bounded(s, cs, rx, t);
  auto r = check_feasibility(tp.prob);
  REQUIRE(r.feasible());
  TxDesign tx = tp.extract(r.x);

  double power = tx.r.real().trace();
  for (const MatC& w : tx.w) power += w.real().trace();
  CHECK(power <= s.power_budget * (1 + 1e-9));

  const double eta = solve_eta(s.covertness_eps, s.blocklength);
  for (int k = 0; k < 4; ++k)
    CHECK(comm_sinr(s, tx, k, cs.comm[k], Hyp::on) >=
          s.users[k].sinr_target * (1 - 1e-6));
  for (int i = 0; i < 2; ++i) {
    const auto& sc = s.scatterers[cs.target_index[i]];
    CovertnessMetrics cm =
        covertness_metrics(s, tx, cs.warden[i], sc.warden_noise, eta);
    CHECK(cm.lhs <= cm.rhs + 1e-7 * (1 + std::abs(cm.rhs)));
    for (Hyp hyp : {Hyp::on, Hyp::off})
      CHECK(radar_sinr(s, tx, rx, cs.radar, i, hyp) >= t * (1 - 1e-6));
  }
}

TEST_CASE("transmit problem rejects floors above the power-limited ceiling") {
  Scenario s = bounded_default(0.01);
  ChannelSet cs = build_channels(s);
  RxDesign rx = flat_rx(2, 6);
  TxProblem tp = build_tx_problem_bounded(s, cs, rx, 2.0e5);
  auto r = check_feasibility(tp.prob);
  CHECK(!r.feasible());
}

TEST_CASE("robust transmit design survives sampled perturbations") {
  Scenario s = bounded_default(0.01);
  ChannelSet cs = build_channels(s);
  RxDesign rx = flat_rx(2, 6);
  // robust flat-combiner ceiling sits near 0.4 at this kappa; stay below it
  const double t = 0.3;
  TxProblem tp = build_tx_problem_bounded(s, cs, rx, t);
  auto r = check_feasibility(tp.prob);
  REQUIRE(r.feasible());
  TxDesign tx = tp.extract(r.x);

  SampledWorst w = sample_worst(s, cs, tx, rx, 400);
  CHECK(w.comm >= 1.0 - 1e-6);
  CHECK(w.covert_gap <= 1e-7);
  CHECK(w.radar >= t * (1 - 1e-6));

  SUBCASE("receive problem accepts and improves the design") {
    RxProblem rp = build_rx_problem_bounded(s, cs, tx, t);
    auto rr = check_feasibility(rp.prob);
    REQUIRE(rr.feasible());
    RxDesign rx2 = rp.extract(rr.x);
    for (int i = 0; i < 2; ++i) {
      CHECK(rx2.f_on[i].real().trace() == doctest::Approx(1.0).epsilon(1e-7));
      CHECK(rx2.f_off[i].real().trace() == doctest::Approx(1.0).epsilon(1e-7));
    }
    SampledWorst w2 = sample_worst(s, cs, tx, rx2, 400);
    CHECK(w2.radar >= t * (1 - 1e-6));
  }
}

TEST_CASE("rank-one forcing squeezes the user covariances to rank one") {
  Scenario s = bounded_default(0.01);
  ChannelSet cs = build_channels(s);
  RxDesign rx = flat_rx(2, 6);
  const double t = 0.2;
  TxProblem base = build_tx_problem_bounded(s, cs, rx, t);
  auto r0 = check_feasibility(base.prob);
  REQUIRE(r0.feasible());
  TxDesign tx = base.extract(r0.x);
  VecR latest = r0.x;

  // Anchored lift iterations shrink the second eigenvalue; each round first
  // tries to round the current iterate to exactly rank one, keeping every
  // auxiliary variable, and accepts once the independent residual check
  // clears. A rounded design is a true fixed point of the lift.
  bool accepted = false;
  for (int round = 0; round < 8 && !accepted; ++round) {
    VecR xb = latest.head(base.prob.n_params());
    for (size_t k = 0; k < tx.w.size(); ++k)
      base.prob.assign_matrix(base.w_vars[k], rank_one_project(tx.w[k]), xb);
    if (conic::check_assignment(base.prob, xb).worst() >= -1e-7) {
      tx = base.extract(xb);
      accepted = true;
      break;
    }
    std::vector<MatC> anchors = tx.w;
    TxProblem lifted = build_tx_problem_bounded(s, cs, rx, t, &anchors);
    auto r = check_feasibility(lifted.prob);
    REQUIRE(r.feasible());
    tx = lifted.extract(r.x);
    latest = r.x;
  }
  REQUIRE(accepted);
  for (const MatC& w : tx.w) CHECK(second_ratio(w) <= 1e-5);

  // the squeezed design still meets everything
  SampledWorst w = sample_worst(s, cs, tx, rx, 200);
  CHECK(w.comm >= 1.0 - 1e-6);
  CHECK(w.covert_gap <= 1e-7);
  CHECK(w.radar >= t * (1 - 1e-6));
}
