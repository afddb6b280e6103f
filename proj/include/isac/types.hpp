#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace isac {

using cxd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

inline constexpr double pi = 3.14159265358979323846;

/// Power-style dB conversions (10*log10).
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Invalid scenario/config contents. `what()` names the offending field.
struct InvalidInput : std::runtime_error {
  explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed document (syntax, missing key, bad unit suffix).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Frobenius inner product Re<A,B> for complex matrices.
inline double frob_inner(const MatC& a, const MatC& b) {
  return (a.conjugate().cwiseProduct(b)).sum().real();
}

/// Hermitian part; used to scrub round-off before eigendecompositions.
inline MatC hermitian_part(const MatC& a) { return 0.5 * (a + a.adjoint()); }

}  // namespace isac
