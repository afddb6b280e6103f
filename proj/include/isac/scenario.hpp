#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isac/rng.hpp"
#include "isac/types.hpp"

namespace isac {

struct ArrayGeometry {
  int m_tx = 1;
  int m_rx = 1;
  double spacing_wavelengths = 0.5;  // element pitch d/lambda
};

enum class ScattererKind { target, clutter };

/// One far-field scatterer. Targets double as wardens: they carry a direct
/// channel gain to the sensing-evading detector plus that detector's noise.
struct Scatterer {
  ScattererKind kind = ScattererKind::target;
  double angle_deg = 90.0;
  cxd reflection_gain{1.0, 0.0};  // two-way radar gain alpha
  cxd warden_gain{1.0, 0.0};      // one-way gain beta (targets only)
  double warden_noise = 1.0;      // detector noise power, linear (targets only)
};

enum class UserKind { overt, covert };

struct User {
  UserKind kind = UserKind::overt;
  VecC channel_est;          // estimated downlink channel, length m_tx
  double sinr_target = 1.0;  // linear, > 0
  double noise_power = 1.0;  // linear, > 0
};

/// Norm-ball radii (squared) for the bounded error model. The radar entry is
/// the combined ball over the stacked scatterer-channel perturbation.
struct BoundedErrors {
  std::vector<double> comm_sq;
  std::vector<double> warden_sq;
  double radar_sq = 0.0;
};

/// Gaussian error covariances. The stacked radar error is block-diagonal per
/// scatterer; one block per scatterer, each (m_tx*m_rx) square.
struct ProbabilisticErrors {
  std::vector<MatC> comm_cov;
  std::vector<MatC> warden_cov;
  std::vector<MatC> radar_cov_blocks;
};

enum class ErrorModelKind { bounded, probabilistic };

/// Active error-model variant plus, when budgets were derived from a scaling
/// factor kappa, enough provenance to derive the counterpart variant.
struct ErrorModel {
  ErrorModelKind kind = ErrorModelKind::bounded;
  std::optional<double> kappa;
  std::optional<BoundedErrors> bounded;
  std::optional<ProbabilisticErrors> probabilistic;
};

struct OutageParams {
  double rho_r = 0.05;  // per radar chance constraint
  double rho_c = 0.05;  // per communication user
  double rho_w = 0.05;  // per covertness constraint
};

struct Scenario {
  ArrayGeometry geometry;
  std::vector<Scatterer> scatterers;  // order fixes radar stacking order
  std::vector<User> users;
  double power_budget = 1000.0;  // linear
  double radar_noise = 1.0;      // linear
  int blocklength = 1000;        // covert transmission length N
  double covertness_eps = 0.1;   // in [0,1)
  OutageParams outage;
  ErrorModel error_model;
  uint64_t seed = 1;

  int n_targets() const;
  int n_clutters() const;
  int n_overt() const;
  int n_covert() const;
};

/// Estimated channels assembled from scenario geometry and gains.
struct ChannelSet {
  std::vector<VecC> comm;         // per user, length m_tx
  std::vector<VecC> warden;       // per target, length m_tx
  std::vector<MatC> radar;        // per scatterer, m_rx x m_tx, rank one
  VecC radar_stacked;             // vec of each radar block, concatenated
  std::vector<int> target_index;  // positions of targets within scatterers
};

/// Uniform linear array response, element m carrying phase
/// 2*pi*m*spacing*cos(angle), m = 0..n-1. Unit-modulus entries.
VecC steering_vector(double angle_deg, int n, double spacing_wavelengths);

ChannelSet build_channels(const Scenario& s);

/// Both error-model variants matched to one scaling factor kappa:
/// covariances kappa*||nominal||^2/dim * I, and ball radii sized so the
/// Gaussian error stays inside with probability 1-rho,
/// e^2 = (kappa*||nominal||^2 / (2*dim)) * chi2_quantile(2*dim, 1-rho).
struct ErrorBudgetPair {
  BoundedErrors bounded;
  ProbabilisticErrors probabilistic;
};
ErrorBudgetPair derive_error_budgets(const Scenario& s, double kappa);

/// Scenario with the requested variant active, deriving it from stored kappa
/// provenance when absent. Throws InvalidInput when underivable.
Scenario with_error_model(const Scenario& s, ErrorModelKind kind);

enum class SampleMode { interior, boundary };

/// One joint draw of all channel perturbations.
struct ErrorDraw {
  std::vector<VecC> comm;
  std::vector<VecC> warden;
  VecC radar;  // stacked, scatterer order
};

/// Prepared sampler: budgets resolved and covariance square roots factored
/// once, so per-draw cost is linear in the perturbation dimension.
class ErrorSampler {
 public:
  ErrorSampler(const Scenario& s, ErrorModelKind kind);
  ErrorDraw draw(uint64_t index, SampleMode mode) const;
  const Scenario& prepared() const { return scenario_; }

 private:
  Scenario scenario_;
  ErrorModelKind kind_;
  std::vector<MatC> comm_sqrt_, warden_sqrt_, radar_sqrt_;  // probabilistic only
};

/// Reproducible perturbation draw number `index` for the scenario seed.
/// Bounded model: uniform direction, radius e*u^(1/2n) (interior) or exactly
/// e (boundary). Probabilistic model: CN(0, E); mode is ignored.
ErrorDraw sample_error(const Scenario& s, ErrorModelKind kind, uint64_t index,
                       SampleMode mode);

/// Channels with a perturbation applied.
ChannelSet apply_error(const ChannelSet& nominal, const ErrorDraw& draw);

/// Scenario document round-trip. Numbers ending in _db/_dbm accept either a
/// bare number or a string with the matching unit suffix; unknown keys are
/// rejected. save_scenario(load_scenario(x)) is lossless.
Scenario load_scenario(const std::string& json_text);
Scenario load_scenario_file(const std::string& path);
std::string save_scenario(const Scenario& s);

/// Stable content hash of the canonical serialized form (FNV-1a, hex).
std::string scenario_hash(const Scenario& s);

/// Built-in reference setup: 6x6 half-wavelength arrays, targets at 80 and
/// 100 degrees, clutters at 40 and 150, all gains 0 dB, two overt plus two
/// covert users with CN(0,I) estimates drawn from the seed, 30 dBm budget,
/// unit noise everywhere, N=1000, eps=0.1, all outage rates 0.05, kappa=0.01.
Scenario default_scenario(uint64_t seed = 1,
                          ErrorModelKind kind = ErrorModelKind::bounded);

void validate(const Scenario& s);

}  // namespace isac
