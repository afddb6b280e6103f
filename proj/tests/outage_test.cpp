#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "isac/conic_solve.hpp"
#include "isac/metrics.hpp"
#include "isac/outage.hpp"
#include "isac/rng.hpp"
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

VecC random_vec(std::mt19937_64& g, int n) {
  std::normal_distribution<double> nd;
  VecC v(n);
  for (int i = 0; i < n; ++i) v(i) = cxd(nd(g), nd(g));
  return v;
}

Scenario with_pair(Scenario s, double kappa, ErrorModelKind kind) {
  ErrorBudgetPair b = derive_error_budgets(s, kappa);
  s.error_model.kind = kind;
  s.error_model.kappa = kappa;
  s.error_model.bounded = b.bounded;
  s.error_model.probabilistic = b.probabilistic;
  return s;
}

Scenario prob_default(double kappa) {
  return with_pair(default_scenario(), kappa, ErrorModelKind::probabilistic);
}

RxDesign flat_rx(int n_targets, int mr) {
  RxDesign rx;
  rx.f_on.assign(n_targets, MatC::Identity(mr, mr) / mr);
  rx.f_off = rx.f_on;
  return rx;
}

// feasibility of one emitted chance constraint with constant data
conic::SolveStatus probe_constant(const MatC& a, const VecC& b, double s,
                                  double rho) {
  conic::FeasibilityProblem p;
  add_bernstein_ge(p, "c",
                   {{conic::HermExpr::constant(a), conic::VecExpr::constant(b)}},
                   conic::LinExpr::constant(s), rho);
  return check_feasibility(p).status;
}

// smallest offset the emitted conditions can accept, from their closed form:
// the norm bound and the spectral shift are both tight at the optimum
double lemma_floor(const MatC& a, const VecC& b, double rho) {
  Eigen::SelfAdjointEigenSolver<MatC> es(a);
  const double y = std::max(0.0, -es.eigenvalues().minCoeff());
  const double x = std::sqrt(a.squaredNorm() + 2.0 * b.squaredNorm());
  return -a.trace().real() + std::sqrt(2.0 * std::log(1.0 / rho)) * x +
         std::log(1.0 / rho) * y;
}

// two-antenna setup small enough that the unfactored emission stays cheap
Scenario mini_scenario() {
  Scenario s;
  s.geometry.m_tx = 2;
  s.geometry.m_rx = 2;
  Scatterer tgt;
  tgt.kind = ScattererKind::target;
  tgt.angle_deg = 75.0;
  tgt.reflection_gain = cxd(0.9, 0.2);
  tgt.warden_gain = cxd(0.8, -0.1);
  tgt.warden_noise = 1.0;
  Scatterer cl;
  cl.kind = ScattererKind::clutter;
  cl.angle_deg = 30.0;
  cl.reflection_gain = cxd(0.5, -0.4);
  s.scatterers = {tgt, cl};
  User overt;
  overt.kind = UserKind::overt;
  overt.channel_est = steering_vector(55.0, 2, 0.5) * cxd(1.1, 0.3);
  overt.sinr_target = 1.3;
  User covert;
  covert.kind = UserKind::covert;
  covert.channel_est = steering_vector(120.0, 2, 0.5) * cxd(0.9, -0.2);
  covert.sinr_target = 1.1;
  s.users = {overt, covert};
  s.power_budget = 50.0;
  s.blocklength = 500;
  s.covertness_eps = 0.15;
  s.seed = 7;
  return s;
}

double tx_ceiling(const Scenario& s, const ChannelSet& cs, const RxDesign& rx,
                  double lo, double hi, int steps) {
  for (int it = 0; it < steps; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto r = check_feasibility(build_tx_problem_outage(s, cs, rx, mid).prob);
    (r.status == conic::SolveStatus::feasible ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("a sure event is accepted exactly when its offset is nonnegative") {
  const MatC a = MatC::Zero(3, 3);
  const VecC b = VecC::Zero(3);
  for (double rho : {0.05, 0.3}) {
    CHECK(probe_constant(a, b, 1e-3, rho) == conic::SolveStatus::feasible);
    CHECK(probe_constant(a, b, -1e-3, rho) == conic::SolveStatus::infeasible);
  }
}

TEST_CASE("pure quadratic decay matches the closed-form floor") {
  const int n = 3;
  const double rho = 0.1;
  const MatC a = -MatC::Identity(n, n);
  const VecC b = VecC::Zero(n);
  // trace n, norm sqrt(n), unit spectral shift
  const double floor = n + std::sqrt(2.0 * std::log(1.0 / rho)) * std::sqrt(double(n)) +
                       std::log(1.0 / rho);
  CHECK(lemma_floor(a, b, rho) == doctest::Approx(floor).epsilon(1e-12));
  CHECK(probe_constant(a, b, floor * (1 + 1e-3), rho) ==
        conic::SolveStatus::feasible);
  CHECK(probe_constant(a, b, floor * (1 - 1e-3), rho) ==
        conic::SolveStatus::infeasible);

  // the exact requirement for Pr(|e|^2 <= s) >= 0.9 with e standard complex
  // normal is half the chi-square quantile; the emitted sufficient
  // condition must sit above it, and the exact threshold must be rejected
  const double exact = 10.644640675668422 / 2.0;
  CHECK(floor > exact);
  CHECK(probe_constant(a, b, exact, rho) == conic::SolveStatus::infeasible);
}

TEST_CASE("random events: emitter matches the analytic floor and bounds the miss rate") {
  std::mt19937_64 g(414);
  const int n = 4;
  int checked = 0;
  for (double rho : {0.05, 0.1, 0.3}) {
    const MatC a = random_hermitian(g, n, 1.0);
    const VecC b = 0.7 * random_vec(g, n);
    const double floor = lemma_floor(a, b, rho);
    const double step = 1e-3 * std::max(1.0, std::abs(floor));
    CHECK(probe_constant(a, b, floor + step, rho) ==
          conic::SolveStatus::feasible);
    CHECK(probe_constant(a, b, floor - step, rho) ==
          conic::SolveStatus::infeasible);

    // accepted offset must keep the miss rate under rho for standard
    // complex normal errors
    Eigen::SelfAdjointEigenSolver<MatC> es(a);
    const VecR lam = es.eigenvalues();
    const MatC u = es.eigenvectors();
    const VecC bu = u.adjoint() * b;
    Rng rng(99, uint32_t(100 + checked));
    const int draws = 150000;
    int miss = 0;
    for (int d = 0; d < draws; ++d) {
      const VecC e = rng.cnormal_vector(uint64_t(d), n);
      double v = floor;
      for (int i = 0; i < n; ++i)
        v += lam(i) * std::norm(e(i)) + 2.0 * (bu(i) * std::conj(e(i))).real();
      if (v < 0.0) ++miss;
    }
    const double rate = double(miss) / draws;
    CHECK(rate <= rho);
    ++checked;
  }
  CHECK(checked == 3);
}

TEST_CASE("vanishing uncertainty reproduces the hard-constraint designs") {
  Scenario pe = prob_default(0.0);
  Scenario be = with_pair(default_scenario(), 0.0, ErrorModelKind::bounded);
  ChannelSet cs = build_channels(pe);
  RxDesign rx = flat_rx(int(cs.target_index.size()), pe.geometry.m_rx);
  for (double t : {0.8, 1.0}) {
    auto rp = check_feasibility(build_tx_problem_outage(pe, cs, rx, t).prob);
    auto rb = check_feasibility(build_tx_problem_bounded(be, cs, rx, t).prob);
    CHECK(rp.status == rb.status);
    if (t == 0.8) {
      REQUIRE(rp.status == conic::SolveStatus::feasible);
    } else {
      CHECK(rp.status == conic::SolveStatus::infeasible);
    }
  }
  TxProblem tp = build_tx_problem_outage(pe, cs, rx, 0.8);
  auto r = check_feasibility(tp.prob);
  REQUIRE(r.feasible());
  TxDesign tx = tp.extract(r.x);
  auto rrx = check_feasibility(build_rx_problem_outage(pe, cs, tx, 0.8).prob);
  auto brx = check_feasibility(build_rx_problem_bounded(be, cs, tx, 0.8).prob);
  CHECK(rrx.status == conic::SolveStatus::feasible);
  CHECK(rrx.status == brx.status);
}

TEST_CASE("default scenario designs stay inside their miss budgets") {
  Scenario s = prob_default(0.01);
  ChannelSet cs = build_channels(s);
  RxDesign rx = flat_rx(int(cs.target_index.size()), s.geometry.m_rx);
  const double t = 0.5;

  TxProblem tp = build_tx_problem_outage(s, cs, rx, t);
  auto r = check_feasibility(tp.prob);
  REQUIRE(r.feasible());
  TxDesign tx = tp.extract(r.x);

  RxProblem rp = build_rx_problem_outage(s, cs, tx, t);
  auto r2 = check_feasibility(rp.prob);
  REQUIRE(r2.feasible());
  RxDesign rx2 = rp.extract(r2.x);
  for (const MatC& f : rx2.f_on) {
    CHECK(f.trace().real() == doctest::Approx(1.0).epsilon(1e-6));
    Eigen::SelfAdjointEigenSolver<MatC> es(f);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }

  const double eta = solve_eta(s.covertness_eps, s.blocklength);
  const int draws = 1500;
  ErrorSampler sampler(s, ErrorModelKind::probabilistic);
  std::vector<int> comm_miss(s.users.size(), 0);
  std::vector<int> covert_miss(cs.target_index.size(), 0);
  // radar misses counted per target, hypothesis, and combiner set
  std::vector<int> radar_miss(cs.target_index.size() * 4, 0);
  for (int d = 0; d < draws; ++d) {
    ChannelSet pert = apply_error(cs, sampler.draw(uint64_t(d), SampleMode::interior));
    for (size_t k = 0; k < s.users.size(); ++k)
      if (comm_sinr(s, tx, int(k), pert.comm[k], Hyp::on) <
          s.users[k].sinr_target * (1 - 1e-9))
        ++comm_miss[k];
    for (size_t i = 0; i < cs.target_index.size(); ++i) {
      const auto& sc = s.scatterers[cs.target_index[i]];
      CovertnessMetrics cm =
          covertness_metrics(s, tx, pert.warden[i], sc.warden_noise, eta);
      if (cm.lhs > cm.rhs + 1e-12) ++covert_miss[i];
      int slot = int(i) * 4;
      for (const RxDesign* rr : {&rx, &rx2})
        for (Hyp hyp : {Hyp::on, Hyp::off}) {
          if (radar_sinr(s, tx, *rr, pert.radar, int(i), hyp) < t * (1 - 1e-9))
            ++radar_miss[slot];
          ++slot;
        }
    }
  }
  auto bar = [&](double rho) {
    return rho + 3.0 * std::sqrt(rho * (1.0 - rho) / draws);
  };
  for (size_t k = 0; k < comm_miss.size(); ++k)
    CHECK(double(comm_miss[k]) / draws <= bar(s.outage.rho_c));
  for (size_t i = 0; i < covert_miss.size(); ++i)
    CHECK(double(covert_miss[i]) / draws <= bar(s.outage.rho_w));
  for (size_t q = 0; q < radar_miss.size(); ++q)
    CHECK(double(radar_miss[q]) / draws <= bar(s.outage.rho_r));
}

TEST_CASE("identity-covariance fast path agrees with the general emitter") {
  Scenario sw = with_pair(mini_scenario(), 0.02, ErrorModelKind::probabilistic);
  Scenario sg = sw;
  {
    auto& blocks = sg.error_model.probabilistic->radar_cov_blocks;
    for (auto& e : blocks) {
      const int n = int(e.rows());
      for (int i = 0; i < n; ++i) e(i, i) += 1e-9 * double(i + 1) / n;
    }
  }
  ChannelSet cs = build_channels(sw);
  RxDesign rx = flat_rx(int(cs.target_index.size()), sw.geometry.m_rx);

  const double cw = tx_ceiling(sw, cs, rx, 1e-3, 60.0, 14);
  const double cg = tx_ceiling(sg, cs, rx, 1e-3, 60.0, 14);
  CHECK(cw > 1e-3);
  CHECK(std::abs(cw - cg) <= 2.0 * 60.0 / (1 << 14) + 1e-6 * cw);

  // receive side agreement at a comfortably feasible floor
  const double t = 0.5 * cw;
  TxProblem tp = build_tx_problem_outage(sw, cs, rx, t);
  auto r = check_feasibility(tp.prob);
  REQUIRE(r.feasible());
  TxDesign tx = tp.extract(r.x);
  auto rw = check_feasibility(build_rx_problem_outage(sw, cs, tx, t).prob);
  auto rg = check_feasibility(build_rx_problem_outage(sg, cs, tx, t).prob);
  CHECK(rw.status == conic::SolveStatus::feasible);
  CHECK(rw.status == rg.status);
}

TEST_CASE("problem construction is deterministic") {
  Scenario s = prob_default(0.01);
  ChannelSet cs = build_channels(s);
  RxDesign rx = flat_rx(int(cs.target_index.size()), s.geometry.m_rx);
  const std::string d1 = build_tx_problem_outage(s, cs, rx, 0.5).prob.dump_json();
  const std::string d2 = build_tx_problem_outage(s, cs, rx, 0.5).prob.dump_json();
  CHECK(d1 == d2);
  CHECK(!d1.empty());
}

TEST_CASE("rank-one anchors carry over to chance-constrained problems") {
  Scenario s = prob_default(0.01);
  ChannelSet cs = build_channels(s);
  RxDesign rx = flat_rx(int(cs.target_index.size()), s.geometry.m_rx);
  const double t = 0.4;
  TxProblem base = build_tx_problem_outage(s, cs, rx, t);
  auto r0 = check_feasibility(base.prob);
  REQUIRE(r0.feasible());
  TxDesign tx = base.extract(r0.x);
  std::vector<MatC> anchors;
  for (const MatC& w : tx.w) {
    Eigen::SelfAdjointEigenSolver<MatC> es(w);
    const int n = int(w.rows());
    const double l1 = std::max(0.0, es.eigenvalues()(n - 1));
    anchors.push_back(l1 * es.eigenvectors().col(n - 1) *
                      es.eigenvectors().col(n - 1).adjoint());
  }
  TxProblem lifted = build_tx_problem_outage(s, cs, rx, t, &anchors);
  CHECK(lifted.prob.n_params() > base.prob.n_params());
  auto r1 = check_feasibility(lifted.prob);
  CHECK(r1.feasible());
}
