#include "isac/scenario.hpp"

#include <cmath>

#include "isac/stats.hpp"

namespace isac {

int Scenario::n_targets() const {
  int n = 0;
  for (const auto& sc : scatterers) n += (sc.kind == ScattererKind::target);
  return n;
}
int Scenario::n_clutters() const { return int(scatterers.size()) - n_targets(); }
int Scenario::n_overt() const {
  int n = 0;
  for (const auto& u : users) n += (u.kind == UserKind::overt);
  return n;
}
int Scenario::n_covert() const { return int(users.size()) - n_overt(); }

VecC steering_vector(double angle_deg, int n, double spacing_wavelengths) {
  if (n < 1) throw InvalidInput("steering_vector: array size must be >= 1");
  VecC a(n);
  double c = 2.0 * pi * spacing_wavelengths * std::cos(angle_deg * pi / 180.0);
  for (int m = 0; m < n; ++m) a(m) = std::polar(1.0, c * m);
  return a;
}

ChannelSet build_channels(const Scenario& s) {
  validate(s);
  ChannelSet ch;
  const int mt = s.geometry.m_tx, mr = s.geometry.m_rx;
  for (const auto& u : s.users) ch.comm.push_back(u.channel_est);
  ch.radar_stacked.resize(int(s.scatterers.size()) * mt * mr);
  int off = 0;
  for (int j = 0; j < int(s.scatterers.size()); ++j) {
    const auto& sc = s.scatterers[j];
    VecC at = steering_vector(sc.angle_deg, mt, s.geometry.spacing_wavelengths);
    VecC ar = steering_vector(sc.angle_deg, mr, s.geometry.spacing_wavelengths);
    MatC h = sc.reflection_gain * (ar.conjugate() * at.adjoint());  // rank one
    ch.radar.push_back(h);
    ch.radar_stacked.segment(off, mt * mr) = Eigen::Map<const VecC>(h.data(), mt * mr);
    off += mt * mr;
    if (sc.kind == ScattererKind::target) {
      ch.warden.push_back(sc.warden_gain * at);
      ch.target_index.push_back(j);
    }
  }
  return ch;
}

ErrorBudgetPair derive_error_budgets(const Scenario& s, double kappa) {
  if (kappa < 0.0) throw InvalidInput("derive_error_budgets: kappa must be >= 0");
  ChannelSet ch = build_channels(s);
  const int mt = s.geometry.m_tx, mr = s.geometry.m_rx;
  const int nblk = int(s.scatterers.size());
  ErrorBudgetPair out;
  // Ball radius chosen so the matched Gaussian error lands inside it with
  // probability 1-rho: ||e||^2 = (sigma^2/2) * F^-1_{chi2_{2 dim}}(1-rho)
  // with sigma^2 the per-entry variance kappa*norm^2/dim. Radii derived from
  // the total energy instead (dropping /dim) would let the radar ball swallow
  // a whole scatterer channel at kappa ~ 1e-3, making every positive SINR
  // floor vacuously infeasible.
  auto ball = [&](double norm_sq, int dim, double rho) {
    if (kappa == 0.0) return 0.0;
    return 0.5 * kappa * norm_sq / dim * chi2_quantile(2 * dim, 1.0 - rho);
  };
  for (const auto& h : ch.comm) {
    double nsq = h.squaredNorm();
    out.bounded.comm_sq.push_back(ball(nsq, mt, s.outage.rho_c));
    out.probabilistic.comm_cov.push_back(kappa * nsq / mt * MatC::Identity(mt, mt));
  }
  for (const auto& h : ch.warden) {
    double nsq = h.squaredNorm();
    out.bounded.warden_sq.push_back(ball(nsq, mt, s.outage.rho_w));
    out.probabilistic.warden_cov.push_back(kappa * nsq / mt * MatC::Identity(mt, mt));
  }
  double gsq = ch.radar_stacked.squaredNorm();
  int gdim = nblk * mt * mr;
  out.bounded.radar_sq = ball(gsq, gdim, s.outage.rho_r);
  for (int j = 0; j < nblk; ++j)
    out.probabilistic.radar_cov_blocks.push_back(kappa * gsq / gdim *
                                                 MatC::Identity(mt * mr, mt * mr));
  return out;
}

Scenario with_error_model(const Scenario& s, ErrorModelKind kind) {
  Scenario out = s;
  out.error_model.kind = kind;
  bool have = (kind == ErrorModelKind::bounded) ? s.error_model.bounded.has_value()
                                                : s.error_model.probabilistic.has_value();
  if (!have) {
    if (!s.error_model.kappa)
      throw InvalidInput(
          "with_error_model: requested variant absent and no kappa provenance "
          "to derive it from");
    auto pair = derive_error_budgets(s, *s.error_model.kappa);
    out.error_model.bounded = pair.bounded;
    out.error_model.probabilistic = pair.probabilistic;
  }
  return out;
}

namespace {

// Hermitian square root with eigenvalues in [-1e-12, 0) clipped to zero;
// more negative means the covariance is not PSD and the scenario is invalid.
MatC psd_sqrt(const MatC& e, const char* what) {
  Eigen::SelfAdjointEigenSolver<MatC> es(hermitian_part(e));
  VecR lam = es.eigenvalues();
  double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-12 * scale)
      throw InvalidInput(std::string(what) + ": covariance is not positive semidefinite");
    lam(i) = std::sqrt(std::max(0.0, lam(i)));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

VecC ball_sample(const Rng& rng, uint64_t index, int n, double radius_sq,
                 SampleMode mode) {
  if (radius_sq <= 0.0) return VecC::Zero(n);
  VecC dir = rng.cnormal_vector(index, n);
  double nrm = dir.norm();
  if (nrm == 0.0) dir(0) = 1.0, nrm = 1.0;
  double r = std::sqrt(radius_sq);
  if (mode == SampleMode::interior) {
    double u = rng.uniform(index, uint32_t(n));
    r *= std::pow(u, 1.0 / (2.0 * n));  // uniform over the complex ball
  }
  return (r / nrm) * dir;
}

}  // namespace

ErrorSampler::ErrorSampler(const Scenario& s, ErrorModelKind kind)
    : scenario_(with_error_model(s, kind)), kind_(kind) {
  if (kind_ == ErrorModelKind::probabilistic) {
    const auto& p = *scenario_.error_model.probabilistic;
    for (const auto& e : p.comm_cov) comm_sqrt_.push_back(psd_sqrt(e, "comm_cov"));
    for (const auto& e : p.warden_cov) warden_sqrt_.push_back(psd_sqrt(e, "warden_cov"));
    for (const auto& e : p.radar_cov_blocks) radar_sqrt_.push_back(psd_sqrt(e, "radar_cov"));
  }
}

ErrorDraw ErrorSampler::draw(uint64_t index, SampleMode mode) const {
  const Scenario& s = scenario_;
  const int mt = s.geometry.m_tx, mr = s.geometry.m_rx;
  const int nblk = int(s.scatterers.size());
  ErrorDraw d;
  if (kind_ == ErrorModelKind::bounded) {
    const auto& b = *s.error_model.bounded;
    for (size_t k = 0; k < b.comm_sq.size(); ++k)
      d.comm.push_back(ball_sample(Rng(s.seed, stream_id(RngStream::comm_error, uint32_t(k))),
                                   index, mt, b.comm_sq[k], mode));
    for (size_t i = 0; i < b.warden_sq.size(); ++i)
      d.warden.push_back(ball_sample(Rng(s.seed, stream_id(RngStream::warden_error, uint32_t(i))),
                                     index, mt, b.warden_sq[i], mode));
    d.radar = ball_sample(Rng(s.seed, stream_id(RngStream::radar_error)), index,
                          nblk * mt * mr, b.radar_sq, mode);
  } else {
    for (size_t k = 0; k < comm_sqrt_.size(); ++k) {
      Rng rng(s.seed, stream_id(RngStream::comm_error, uint32_t(k)));
      d.comm.push_back(comm_sqrt_[k] * rng.cnormal_vector(index, mt));
    }
    for (size_t i = 0; i < warden_sqrt_.size(); ++i) {
      Rng rng(s.seed, stream_id(RngStream::warden_error, uint32_t(i)));
      d.warden.push_back(warden_sqrt_[i] * rng.cnormal_vector(index, mt));
    }
    Rng rng(s.seed, stream_id(RngStream::radar_error));
    d.radar.resize(nblk * mt * mr);
    VecC white = rng.cnormal_vector(index, nblk * mt * mr);
    for (int j = 0; j < nblk; ++j)
      d.radar.segment(j * mt * mr, mt * mr) =
          radar_sqrt_[j] * white.segment(j * mt * mr, mt * mr);
  }
  return d;
}

ErrorDraw sample_error(const Scenario& s, ErrorModelKind kind, uint64_t index,
                       SampleMode mode) {
  return ErrorSampler(s, kind).draw(index, mode);
}

ChannelSet apply_error(const ChannelSet& nominal, const ErrorDraw& draw) {
  ChannelSet ch = nominal;
  for (size_t k = 0; k < ch.comm.size() && k < draw.comm.size(); ++k)
    ch.comm[k] += draw.comm[k];
  for (size_t i = 0; i < ch.warden.size() && i < draw.warden.size(); ++i)
    ch.warden[i] += draw.warden[i];
  if (draw.radar.size() == ch.radar_stacked.size() && draw.radar.size() > 0) {
    ch.radar_stacked += draw.radar;
    int mr = int(ch.radar.empty() ? 0 : ch.radar[0].rows());
    int mt = int(ch.radar.empty() ? 0 : ch.radar[0].cols());
    for (size_t j = 0; j < ch.radar.size(); ++j)
      ch.radar[j] += Eigen::Map<const MatC>(draw.radar.data() + j * mt * mr, mr, mt);
  }
  return ch;
}

void validate(const Scenario& s) {
  if (s.geometry.m_tx < 1 || s.geometry.m_rx < 1)
    throw InvalidInput("geometry: array sizes must be >= 1");
  if (!(s.geometry.spacing_wavelengths > 0.0))
    throw InvalidInput("geometry: spacing_wavelengths must be positive");
  if (s.n_targets() < 1) throw InvalidInput("scatterers: at least one target required");
  for (const auto& sc : s.scatterers)
    if (sc.kind == ScattererKind::target && !(sc.warden_noise > 0.0))
      throw InvalidInput("scatterers: warden noise must be positive");
  for (const auto& u : s.users) {
    if (u.channel_est.size() != s.geometry.m_tx)
      throw InvalidInput("users: channel_est length must equal m_tx");
    if (!(u.sinr_target > 0.0))
      throw InvalidInput("users: sinr_target must be positive");
    if (!(u.noise_power > 0.0))
      throw InvalidInput("users: noise power must be positive");
  }
  if (!(s.power_budget > 0.0)) throw InvalidInput("power_budget_dbm: must be positive");
  if (!(s.radar_noise > 0.0)) throw InvalidInput("radar_noise_dbm: must be positive");
  if (s.blocklength < 1) throw InvalidInput("blocklength: must be >= 1");
  if (!(s.covertness_eps >= 0.0 && s.covertness_eps < 1.0))
    throw InvalidInput("covertness_eps: must lie in [0,1)");
  for (double r : {s.outage.rho_r, s.outage.rho_c, s.outage.rho_w})
    if (!(r > 0.0 && r < 1.0)) throw InvalidInput("outage: rates must lie in (0,1)");
  if (s.error_model.kappa && *s.error_model.kappa < 0.0)
    throw InvalidInput("error_model: kappa must be >= 0");
  const auto& em = s.error_model;
  if (em.kind == ErrorModelKind::bounded && em.bounded) {
    if (em.bounded->comm_sq.size() != s.users.size())
      throw InvalidInput("error_model: one comm budget per user required");
    if (em.bounded->warden_sq.size() != size_t(s.n_targets()))
      throw InvalidInput("error_model: one warden budget per target required");
  }
  if (em.kind == ErrorModelKind::probabilistic && em.probabilistic) {
    if (em.probabilistic->comm_cov.size() != s.users.size())
      throw InvalidInput("error_model: one comm covariance per user required");
    if (em.probabilistic->warden_cov.size() != size_t(s.n_targets()))
      throw InvalidInput("error_model: one warden covariance per target required");
    if (em.probabilistic->radar_cov_blocks.size() != s.scatterers.size())
      throw InvalidInput("error_model: one radar covariance block per scatterer required");
  }
}

Scenario default_scenario(uint64_t seed, ErrorModelKind kind) {
  Scenario s;
  s.geometry = {6, 6, 0.5};
  auto target = [](double ang) {
    Scatterer sc;
    sc.kind = ScattererKind::target;
    sc.angle_deg = ang;
    return sc;
  };
  auto clutter = [](double ang) {
    Scatterer sc;
    sc.kind = ScattererKind::clutter;
    sc.angle_deg = ang;
    return sc;
  };
  s.scatterers = {target(80.0), target(100.0), clutter(40.0), clutter(150.0)};
  double gamma = db_to_linear(2.0);
  for (int k = 0; k < 4; ++k) {
    User u;
    u.kind = k < 2 ? UserKind::overt : UserKind::covert;
    u.sinr_target = gamma;
    u.noise_power = 1.0;
    Rng rng(seed, stream_id(RngStream::comm_channel, uint32_t(k)));
    u.channel_est = rng.cnormal_vector(0, 6);
    s.users.push_back(u);
  }
  s.power_budget = db_to_linear(30.0);  // 30 dBm
  s.radar_noise = 1.0;
  s.blocklength = 1000;
  s.covertness_eps = 0.1;
  s.outage = {0.05, 0.05, 0.05};
  s.seed = seed;
  s.error_model.kind = kind;
  s.error_model.kappa = 0.01;
  auto pair = derive_error_budgets(s, 0.01);
  s.error_model.bounded = pair.bounded;
  s.error_model.probabilistic = pair.probabilistic;
  return s;
}

}  // namespace isac
