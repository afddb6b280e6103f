#include "isac/metrics.hpp"

#include <cmath>
#include <ostream>

#include "isac/stats.hpp"

namespace isac {

namespace {

bool active(UserKind kind, Hyp hyp) {
  return hyp == Hyp::on || kind == UserKind::overt;
}

double quad(const MatC& m, const VecC& v) { return (v.adjoint() * m * v)(0).real(); }

void check_tx(const Scenario& s, const TxDesign& tx) {
  if (tx.w.size() != s.users.size())
    throw InvalidInput("design: one covariance per user required");
  for (const auto& w : tx.w)
    if (w.rows() != s.geometry.m_tx || w.cols() != s.geometry.m_tx)
      throw InvalidInput("design: user covariance must be m_tx square");
  if (tx.r.rows() != s.geometry.m_tx || tx.r.cols() != s.geometry.m_tx)
    throw InvalidInput("design: sensing covariance must be m_tx square");
}

}  // namespace

MatC tx_covariance(const Scenario& s, const TxDesign& tx, Hyp hyp) {
  check_tx(s, tx);
  MatC q = tx.r;
  for (size_t k = 0; k < tx.w.size(); ++k)
    if (active(s.users[k].kind, hyp)) q += tx.w[k];
  return q;
}

double comm_sinr(const Scenario& s, const TxDesign& tx, int k, const VecC& h, Hyp hyp) {
  check_tx(s, tx);
  if (k < 0 || k >= int(s.users.size())) throw InvalidInput("comm_sinr: bad user index");
  double num = quad(tx.w[k], h);
  double den = s.users[k].noise_power + quad(tx.r, h);
  for (size_t q = 0; q < tx.w.size(); ++q)
    if (int(q) != k && active(s.users[q].kind, hyp)) den += quad(tx.w[q], h);
  return num / den;
}

double radar_sinr(const Scenario& s, const TxDesign& tx, const RxDesign& rx,
                  const std::vector<MatC>& radar_channels, int i, Hyp hyp) {
  if (radar_channels.size() != s.scatterers.size())
    throw InvalidInput("radar_sinr: one channel per scatterer required");
  std::vector<int> targets;
  for (int j = 0; j < int(s.scatterers.size()); ++j)
    if (s.scatterers[j].kind == ScattererKind::target) targets.push_back(j);
  if (i < 0 || i >= int(targets.size())) throw InvalidInput("radar_sinr: bad target index");
  const auto& fs = hyp == Hyp::on ? rx.f_on : rx.f_off;
  if (fs.size() != targets.size())
    throw InvalidInput("radar_sinr: one combiner per target required");
  const MatC& f = fs[i];
  MatC q = tx_covariance(s, tx, hyp);
  int self = targets[i];
  double num = 0.0, den = s.radar_noise;
  for (int j = 0; j < int(radar_channels.size()); ++j) {
    const MatC& h = radar_channels[j];
    double p = frob_inner(f, h * q * h.adjoint());
    if (j == self)
      num = p;
    else
      den += p;
  }
  return num / den;
}

double radar_sinr_kron(const Scenario& s, const TxDesign& tx, const RxDesign& rx,
                       const std::vector<MatC>& radar_channels, int i, Hyp hyp) {
  std::vector<int> targets;
  for (int j = 0; j < int(s.scatterers.size()); ++j)
    if (s.scatterers[j].kind == ScattererKind::target) targets.push_back(j);
  if (i < 0 || i >= int(targets.size()))
    throw InvalidInput("radar_sinr_kron: bad target index");
  const auto& fs = hyp == Hyp::on ? rx.f_on : rx.f_off;
  const MatC& f = fs.at(i);
  MatC q = tx_covariance(s, tx, hyp);
  const int mt = s.geometry.m_tx, mr = s.geometry.m_rx;
  MatC big = MatC::Zero(mt * mr, mt * mr);
  for (int a = 0; a < mt; ++a)
    for (int b = 0; b < mt; ++b)
      big.block(a * mr, b * mr, mr, mr) = std::conj(q(a, b)) * f;
  int self = targets[i];
  double num = 0.0, den = s.radar_noise;
  for (int j = 0; j < int(radar_channels.size()); ++j) {
    VecC v = Eigen::Map<const VecC>(radar_channels[j].data(), mt * mr);
    double p = (v.adjoint() * big * v)(0).real();
    if (j == self)
      num = p;
    else
      den += p;
  }
  return num / den;
}

double solve_eta(double eps, int blocklength) {
  if (!(eps >= 0.0 && eps < 1.0)) throw InvalidInput("covertness_eps: must lie in [0,1)");
  if (blocklength < 1) throw InvalidInput("blocklength: must be >= 1");
  if (eps == 0.0) return 0.0;
  return kl_rate_inverse(2.0 * eps * eps / blocklength);
}

CovertnessMetrics covertness_metrics(const Scenario& s, const TxDesign& tx,
                                     const VecC& h, double var_w, double eta) {
  check_tx(s, tx);
  MatC covert = MatC::Zero(s.geometry.m_tx, s.geometry.m_tx);
  MatC overt = tx.r;
  for (size_t k = 0; k < tx.w.size(); ++k) {
    if (s.users[k].kind == UserKind::covert)
      covert += tx.w[k];
    else
      overt += tx.w[k];
  }
  CovertnessMetrics m;
  double pc = quad(covert, h);
  double po = quad(overt, h) + var_w;
  m.x = pc / po;
  m.kl = s.blocklength * kl_rate(m.x);
  m.xi_lower = std::min(1.0, std::max(0.0, 1.0 - std::sqrt(0.5 * m.kl)));
  m.lhs = pc - eta * (po - var_w);
  m.rhs = eta * var_w;
  return m;
}

double tx_beampattern(const Scenario& s, const TxDesign& tx, Hyp hyp, double angle_deg) {
  VecC a = steering_vector(angle_deg, s.geometry.m_tx, s.geometry.spacing_wavelengths);
  return quad(tx_covariance(s, tx, hyp), a);
}

double rx_gain(const Scenario& s, const RxDesign& rx, int i, Hyp hyp, double angle_deg) {
  const auto& fs = hyp == Hyp::on ? rx.f_on : rx.f_off;
  if (i < 0 || i >= int(fs.size())) throw InvalidInput("rx_gain: bad target index");
  VecC ac = steering_vector(angle_deg, s.geometry.m_rx, s.geometry.spacing_wavelengths)
                .conjugate();
  return (ac.adjoint() * fs[i] * ac)(0).real();
}

double rx_beampattern(const Scenario& s, const TxDesign& tx, const RxDesign& rx,
                      int i, Hyp hyp, double angle_deg) {
  return rx_gain(s, rx, i, hyp, angle_deg) * tx_beampattern(s, tx, hyp, angle_deg);
}

void write_beampattern_csv(std::ostream& out, const Scenario& s, const TxDesign& tx,
                           const RxDesign& rx, const std::vector<double>& angles_deg) {
  int nt = int(rx.f_on.size());
  auto db = [](double v) { return std::max(linear_to_db(std::max(v, 0.0)), -400.0); };
  out << "angle_deg,tx_h1,tx_h0";
  for (int i = 0; i < nt; ++i)
    out << ",rx_t" << (i + 1) << "_h1,rx_t" << (i + 1) << "_h0";
  for (int i = 0; i < nt; ++i)
    out << ",rxgain_t" << (i + 1) << "_h1,rxgain_t" << (i + 1) << "_h0";
  out << "\n";
  for (double ang : angles_deg) {
    out << ang << "," << db(tx_beampattern(s, tx, Hyp::on, ang)) << ","
        << db(tx_beampattern(s, tx, Hyp::off, ang));
    for (int i = 0; i < nt; ++i)
      out << "," << db(rx_beampattern(s, tx, rx, i, Hyp::on, ang)) << ","
          << db(rx_beampattern(s, tx, rx, i, Hyp::off, ang));
    for (int i = 0; i < nt; ++i)
      out << "," << db(rx_gain(s, rx, i, Hyp::on, ang)) << ","
          << db(rx_gain(s, rx, i, Hyp::off, ang));
    out << "\n";
  }
}

}  // namespace isac
