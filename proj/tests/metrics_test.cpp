#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "isac/metrics.hpp"
#include "isac/scenario.hpp"
#include "isac/stats.hpp"

using namespace isac;

namespace {

MatC random_psd(std::mt19937_64& g, int n, double scale) {
  std::normal_distribution<double> nd;
  MatC a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cxd(nd(g), nd(g));
  return scale * (a * a.adjoint()) / n;
}

// minimal setup with hand-pickable channels: two elements, one target plus
// one clutter, one overt and one covert user
Scenario tiny_scenario() {
  Scenario s;
  s.geometry.m_tx = 2;
  s.geometry.m_rx = 2;
  s.scatterers.resize(2);
  s.scatterers[0].kind = ScattererKind::target;
  s.scatterers[0].angle_deg = 90.0;
  s.scatterers[1].kind = ScattererKind::clutter;
  s.scatterers[1].angle_deg = 40.0;
  s.users.resize(2);
  s.users[0].kind = UserKind::overt;
  s.users[0].channel_est = VecC::Zero(2);
  s.users[0].channel_est << cxd(1, 0), cxd(0, 0);
  s.users[1].kind = UserKind::covert;
  s.users[1].channel_est = VecC::Zero(2);
  s.users[1].channel_est << cxd(0, 0), cxd(1, 0);
  return s;
}

}  // namespace

TEST_CASE("detection budget eta") {
  CHECK(solve_eta(0.0, 1000) == 0.0);
  const double eta = solve_eta(0.1, 1000);
  CHECK(eta == doctest::Approx(0.00633789567503016).epsilon(1e-9));
  CHECK(std::abs(kl_rate(eta) - 2 * 0.1 * 0.1 / 1000) <= 1e-9 * 2e-5);
}

TEST_CASE("downlink sinr by hand") {
  Scenario s = tiny_scenario();
  TxDesign tx;
  tx.w.resize(2, MatC::Zero(2, 2));
  tx.w[0] << cxd(4, 0), cxd(0, 0), cxd(0, 0), cxd(0, 0);
  tx.w[1] << cxd(1, 0), cxd(0, 0), cxd(0, 0), cxd(9, 0);
  tx.r = MatC::Zero(2, 2);
  tx.r(0, 0) = 1.0;

  const VecC& h0 = s.users[0].channel_est;
  // covert silent: signal 4 over sensing leakage 1 plus unit noise
  CHECK(comm_sinr(s, tx, 0, h0, Hyp::off) == doctest::Approx(2.0).epsilon(1e-12));
  // covert active: its covariance leaks one more unit into user 0
  CHECK(comm_sinr(s, tx, 0, h0, Hyp::on) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  // covert user sees no interference along its channel
  CHECK(comm_sinr(s, tx, 1, s.users[1].channel_est, Hyp::on) ==
        doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("activating covert users never helps an overt user") {
  Scenario s = default_scenario();
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 20; ++trial) {
    TxDesign tx;
    for (int k = 0; k < 4; ++k) tx.w.push_back(random_psd(g, 6, 10.0));
    tx.r = random_psd(g, 6, 20.0);
    for (int k = 0; k < 2; ++k) {
      const VecC& h = s.users[k].channel_est;
      CHECK(comm_sinr(s, tx, k, h, Hyp::on) <=
            comm_sinr(s, tx, k, h, Hyp::off) * (1 + 1e-12));
    }
  }
}

TEST_CASE("echo sinr by hand on single-element arrays") {
  Scenario s = tiny_scenario();
  s.geometry.m_tx = 1;
  s.geometry.m_rx = 1;
  s.scatterers[1].reflection_gain = cxd(0.5, 0.0);
  s.users[0].channel_est = VecC::Ones(1);
  s.users[1].channel_est = VecC::Ones(1);

  ChannelSet cs = build_channels(s);
  TxDesign tx;
  tx.w.assign(2, MatC::Zero(1, 1));
  tx.w[0](0, 0) = 2.0;
  tx.r = MatC::Zero(1, 1);
  tx.r(0, 0) = 3.0;
  RxDesign rx;
  rx.f_on.assign(1, MatC::Identity(1, 1));
  rx.f_off = rx.f_on;

  // on-air power 5, clutter |0.5|^2 * 5, unit noise
  const double want = 5.0 / (0.25 * 5.0 + 1.0);
  CHECK(radar_sinr(s, tx, rx, cs.radar, 0, Hyp::off) ==
        doctest::Approx(want).epsilon(1e-12));
  CHECK(radar_sinr_kron(s, tx, rx, cs.radar, 0, Hyp::off) ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("stacked-channel form of the echo sinr matches the direct one") {
  Scenario s = default_scenario();
  ChannelSet cs = build_channels(s);
  std::mt19937_64 g(11);
  for (int trial = 0; trial < 100; ++trial) {
    TxDesign tx;
    for (int k = 0; k < 4; ++k) tx.w.push_back(random_psd(g, 6, 5.0));
    tx.r = random_psd(g, 6, 10.0);
    RxDesign rx;
    for (int t = 0; t < 2; ++t) {
      MatC f = random_psd(g, 6, 1.0);
      rx.f_on.push_back(f / f.real().trace());
      f = random_psd(g, 6, 1.0);
      rx.f_off.push_back(f / f.real().trace());
    }
    // perturbed channels too, so the identity is exercised off the rank-one set
    ErrorDraw d = sample_error(s, ErrorModelKind::bounded, trial, SampleMode::boundary);
    ChannelSet pert = apply_error(cs, d);
    for (int i = 0; i < 2; ++i) {
      for (Hyp hyp : {Hyp::on, Hyp::off}) {
        const double a = radar_sinr(s, tx, rx, pert.radar, i, hyp);
        const double b = radar_sinr_kron(s, tx, rx, pert.radar, i, hyp);
        CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
      }
    }
  }
}

TEST_CASE("covertness metrics: silence and boundary") {
  Scenario s = default_scenario();
  ChannelSet cs = build_channels(s);
  const double eta = solve_eta(s.covertness_eps, s.blocklength);
  const VecC& h = cs.warden[0];
  const double var_w = s.scatterers[0].warden_noise;

  TxDesign quiet;
  quiet.w.assign(4, MatC::Zero(6, 6));
  quiet.r = MatC::Identity(6, 6);
  CovertnessMetrics m0 = covertness_metrics(s, quiet, h, var_w, eta);
  CHECK(m0.x == 0.0);
  CHECK(m0.kl == 0.0);
  CHECK(m0.xi_lower == 1.0);
  CHECK(m0.lhs <= 0.0);
  CHECK(m0.rhs == doctest::Approx(eta * var_w));

  // covert power placed exactly on the constraint boundary: the divergence
  // comes out at its design ceiling 2 eps^2
  TxDesign edge;
  edge.w.assign(4, MatC::Zero(6, 6));
  const double c = eta * var_w / h.squaredNorm();
  edge.w[2] = 0.5 * c * MatC::Identity(6, 6);
  edge.w[3] = 0.5 * c * MatC::Identity(6, 6);
  edge.r = MatC::Zero(6, 6);
  CovertnessMetrics m1 = covertness_metrics(s, edge, h, var_w, eta);
  CHECK(m1.lhs == doctest::Approx(m1.rhs).epsilon(1e-12));
  CHECK(m1.x == doctest::Approx(eta).epsilon(1e-12));
  CHECK(m1.kl == doctest::Approx(2 * 0.1 * 0.1).epsilon(1e-10));
  CHECK(m1.xi_lower == doctest::Approx(0.9).epsilon(1e-10));
}

TEST_CASE("beam patterns of identity designs are flat") {
  Scenario s = default_scenario();
  TxDesign tx;
  tx.w.assign(4, MatC::Zero(6, 6));
  tx.r = MatC::Identity(6, 6);
  RxDesign rx;
  rx.f_on.assign(2, MatC::Identity(6, 6));
  rx.f_off = rx.f_on;
  for (double ang : {0.0, 30.0, 80.0, 90.0, 145.0, 180.0}) {
    CHECK(tx_beampattern(s, tx, Hyp::off, ang) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(rx_gain(s, rx, 0, Hyp::on, ang) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(rx_beampattern(s, tx, rx, 1, Hyp::off, ang) ==
          doctest::Approx(36.0).epsilon(1e-12));
  }
}

TEST_CASE("pattern csv layout") {
  Scenario s = default_scenario();
  TxDesign tx;
  tx.w.assign(4, MatC::Zero(6, 6));
  tx.r = MatC::Zero(6, 6);  // silent: tx columns pin to the dB floor
  RxDesign rx;
  rx.f_on.assign(2, MatC::Identity(6, 6) / 6.0);
  rx.f_off = rx.f_on;

  std::ostringstream out;
  write_beampattern_csv(out, s, tx, rx, {10.0, 90.0});
  std::istringstream in(out.str());
  std::string header, row1, row2, extra;
  REQUIRE(std::getline(in, header));
  REQUIRE(std::getline(in, row1));
  REQUIRE(std::getline(in, row2));
  CHECK(!std::getline(in, extra));

  CHECK(header ==
        "angle_deg,tx_h1,tx_h0,rx_t1_h1,rx_t1_h0,rx_t2_h1,rx_t2_h0,"
        "rxgain_t1_h1,rxgain_t1_h0,rxgain_t2_h1,rxgain_t2_h0");
  CHECK(row1.substr(0, 3) == "10,");
  // silent transmitter: clamped at -400 dB
  CHECK(row1.find(",-400,-400,") != std::string::npos);
  CHECK(row2.substr(0, 3) == "90,");
}
