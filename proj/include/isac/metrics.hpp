#pragma once

#include <iosfwd>
#include <vector>

#include "isac/scenario.hpp"
#include "isac/types.hpp"

namespace isac {

/// Signaling hypothesis: `on` includes the covert users' transmissions,
/// `off` only the overt ones (plus the sensing waveform).
enum class Hyp { on, off };

/// Transmit design: one covariance per user plus the dedicated sensing
/// covariance, all m_tx square Hermitian PSD.
struct TxDesign {
  std::vector<MatC> w;
  MatC r;
};

/// Receive design: per-target unit-trace PSD combining matrices under each
/// hypothesis. A rank-one F = f f^H is the vector beamformer case.
struct RxDesign {
  std::vector<MatC> f_on;
  std::vector<MatC> f_off;
};

/// Sum covariance of everything on air under the hypothesis.
MatC tx_covariance(const Scenario& s, const TxDesign& tx, Hyp hyp);

/// Downlink SINR of user k over channel h. Interference counts the other
/// users active under the hypothesis; for an overt user the `on` value is
/// never larger than the `off` value.
double comm_sinr(const Scenario& s, const TxDesign& tx, int k, const VecC& h, Hyp hyp);

/// Echo SINR for target ordinal i (i-th target, not i-th scatterer): desired
/// return through F against all other scatterers plus noise. Accepts lifted
/// F via Tr(F H Q H^H), so vector and matrix receive designs evaluate alike.
double radar_sinr(const Scenario& s, const TxDesign& tx, const RxDesign& rx,
                  const std::vector<MatC>& radar_channels, int i, Hyp hyp);

/// Same quantity through the stacked identity vec(H)^H (conj(Q) kron F)
/// vec(H); an independent code path used to cross-check radar_sinr.
double radar_sinr_kron(const Scenario& s, const TxDesign& tx, const RxDesign& rx,
                       const std::vector<MatC>& radar_channels, int i, Hyp hyp);

/// Low-probability-of-detection budget: eta >= 0 solving
/// kl_rate(eta) = 2*eps^2 / N (eta = 0 when eps = 0).
double solve_eta(double eps, int blocklength);

struct CovertnessMetrics {
  double x;         // excess-variance ratio seen by the detector
  double kl;        // blocklength * kl_rate(x)
  double xi_lower;  // Pinsker floor on the detector's error sum, in [0,1]
  double lhs;       // h^H (sum covert W - eta (sum overt W + R)) h
  double rhs;       // eta * warden noise
};

/// Detection-side quantities at warden channel h with noise var_w.
/// lhs <= rhs is the linearized covertness constraint; on its boundary
/// kl = blocklength * kl_rate(eta).
CovertnessMetrics covertness_metrics(const Scenario& s, const TxDesign& tx,
                                     const VecC& h, double var_w, double eta);

/// Transmit power toward an angle under the hypothesis: a^H Q a.
double tx_beampattern(const Scenario& s, const TxDesign& tx, Hyp hyp, double angle_deg);

/// Bare receive gain of target ordinal i toward an angle: energy the
/// combiner collects from a unit echo arriving at that angle.
double rx_gain(const Scenario& s, const RxDesign& rx, int i, Hyp hyp, double angle_deg);

/// Round-trip receive pattern: rx_gain * tx_beampattern.
double rx_beampattern(const Scenario& s, const TxDesign& tx, const RxDesign& rx,
                      int i, Hyp hyp, double angle_deg);

/// CSV with header angle_deg,tx_h1,tx_h0,rx_t{i}_h1,rx_t{i}_h0,... followed
/// by bare-gain columns rxgain_t{i}_h1,rxgain_t{i}_h0. Values in dB floored
/// at -400 dB. "h1" marks the covert-transmission-on hypothesis.
void write_beampattern_csv(std::ostream& out, const Scenario& s, const TxDesign& tx,
                           const RxDesign& rx, const std::vector<double>& angles_deg);

}  // namespace isac
