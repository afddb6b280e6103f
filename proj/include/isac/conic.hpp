#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isac/types.hpp"

namespace isac::conic {

// Feasibility problems are affine in a vector x of real parameters. A
// Hermitian matrix variable of dimension n owns n*n consecutive parameters:
// the n diagonal entries, then (Re, Im) pairs of the strict upper triangle
// in column-major order. Constraints reference parameters through sparse
// Hermitian coefficient lists, so the solver can exploit structure.

/// One Hermitian coefficient entry: H(i,j) += c with i <= j (conjugate
/// mirrored below the diagonal; diagonal entries must be real).
struct HermEntry {
  int i = 0, j = 0;
  cxd c{0.0, 0.0};
};

/// Hermitian-matrix-valued affine expression.
struct HermExpr {
  int dim = 0;
  MatC cst;  // dense constant part
  std::map<int, std::vector<HermEntry>> coeff;

  static HermExpr zero(int n);
  static HermExpr constant(const MatC& c);
};

/// Complex-vector-valued affine expression (dense coefficients; dims are
/// small wherever these appear).
struct VecExpr {
  int dim = 0;
  VecC cst;
  std::map<int, VecC> coeff;

  static VecExpr zero(int n);
  static VecExpr constant(const VecC& c);
};

/// Real-scalar affine expression.
struct LinExpr {
  double cst = 0.0;
  std::map<int, double> coeff;

  static LinExpr constant(double c);
  static LinExpr var(int param, double scale = 1.0);
  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator*=(double a);
};

HermExpr operator+(const HermExpr& a, const HermExpr& b);
HermExpr operator-(const HermExpr& a, const HermExpr& b);
HermExpr operator*(double a, const HermExpr& e);
LinExpr operator+(const LinExpr& a, const LinExpr& b);
LinExpr operator-(const LinExpr& a, const LinExpr& b);
LinExpr operator*(double a, const LinExpr& e);

/// conj(coefficients) entrywise: expr of conj(H(x)) = H(x)^T.
HermExpr conj_expr(const HermExpr& e);

/// Expr of kron(conj(Q(x)), F) for fixed F.
HermExpr kron_conj_fixed(const HermExpr& q, const MatC& f);

/// Expr of kron(conj(Q), F(x)) for fixed Q.
HermExpr kron_fixed_conj(const MatC& q, const HermExpr& f);

/// Two-sided congruence S * H(x) * S with S Hermitian (a PSD square root);
/// S = c*I is detected and kept sparse.
HermExpr congruence(const MatC& s, const HermExpr& e);

/// H(x) * v as a vector expression.
VecExpr apply_vec(const HermExpr& e, const VecC& v);

/// a * v(x) for fixed a.
VecExpr mat_vec(const MatC& a, const VecExpr& v);

/// Scalar views of single entries: Re/Im of H(x)(i,j) and of v(x)(i).
LinExpr herm_entry_re(const HermExpr& e, int i, int j);
LinExpr herm_entry_im(const HermExpr& e, int i, int j);
LinExpr vec_entry_re(const VecExpr& e, int i);
LinExpr vec_entry_im(const VecExpr& e, int i);

/// v^H H(x) v (real-valued).
LinExpr quad_form(const HermExpr& e, const VecC& v);

LinExpr trace_expr(const HermExpr& e);

/// Tr(a * H(x)) for fixed Hermitian a (real-valued).
LinExpr frob_inner_expr(const MatC& a, const HermExpr& e);

/// [[A, b], [b^H, c]] block of dimension dim(A)+1.
HermExpr arrow(const HermExpr& a, const VecExpr& b, const LinExpr& c);

/// alpha * I as a Hermitian expression of one scalar parameter.
HermExpr scaled_identity(int param, int n, double scale = 1.0);

struct MatrixVarInfo {
  std::string name;
  int dim = 0;
  int offset = 0;   // first parameter
  bool psd = true;  // a PSD cone block was added for it
};

struct ScalarVarInfo {
  std::string name;
  int offset = 0;
  bool nonneg = true;
};

struct LmiConstraint {
  std::string name;
  HermExpr expr;  // require expr(x) >= 0 (PSD)
};

/// || rows(x) ||_2 <= bound(x), rows are real affine scalars.
struct SocConstraint {
  std::string name;
  std::vector<LinExpr> rows;
  LinExpr bound;
};

struct LinearConstraint {
  std::string name;
  LinExpr expr;  // expr(x) >= 0 or expr(x) == 0
  bool equality = false;
};

class FeasibilityProblem {
 public:
  /// Registers a Hermitian matrix variable; when psd, the cone membership
  /// constraint is added automatically.
  int add_matrix_var(const std::string& name, int dim, bool psd = true);
  int add_scalar_var(const std::string& name, bool nonneg = true);

  /// Expression views of registered variables.
  HermExpr matrix_expr(int var) const;
  LinExpr scalar_expr(int var) const;

  void add_lmi(const std::string& name, HermExpr e);
  void add_soc(const std::string& name, std::vector<LinExpr> rows, LinExpr bound);
  void add_linear_ge(const std::string& name, LinExpr e);  // e(x) >= 0
  void add_linear_eq(const std::string& name, LinExpr e);  // e(x) == 0

  int n_params() const { return n_params_; }
  const std::vector<MatrixVarInfo>& matrix_vars() const { return matrix_vars_; }
  const std::vector<ScalarVarInfo>& scalar_vars() const { return scalar_vars_; }
  const std::vector<LmiConstraint>& lmis() const { return lmis_; }
  const std::vector<SocConstraint>& socs() const { return socs_; }
  const std::vector<LinearConstraint>& linear() const { return linear_; }

  /// Hermitian matrix value of a registered variable under an assignment.
  MatC extract_matrix(int var, const VecR& x) const;

  /// Writes x so that the registered variable takes value m (Hermitian).
  void assign_matrix(int var, const MatC& m, VecR& x) const;

  std::string dump_json() const;  // conic-ir/1

 private:
  int n_params_ = 0;
  std::vector<MatrixVarInfo> matrix_vars_;
  std::vector<ScalarVarInfo> scalar_vars_;
  std::vector<LmiConstraint> lmis_;
  std::vector<SocConstraint> socs_;
  std::vector<LinearConstraint> linear_;
};

/// Value of an expression under an assignment.
MatC eval_herm(const HermExpr& e, const VecR& x);
VecC eval_vec(const VecExpr& e, const VecR& x);
double eval_lin(const LinExpr& e, const VecR& x);

/// Real-symmetric embedding [[Re H, -Im H], [Im H, Re H]] of a Hermitian
/// matrix; eigenvalues of H appear twice.
MatR embed_complex(const MatC& h);

/// Worst constraint residuals of an assignment, all normalized so that
/// `value >= -tol` means satisfied.
struct ResidualReport {
  double lmi_margin = 0.0;     // min over blocks of min_eig / (1 + ||block||)
  double soc_margin = 0.0;     // min over cones of (bound - ||rows||) / (1 + |bound|)
  double lin_ge_margin = 0.0;  // min over rows of value / (1 + |cst|)
  double lin_eq_resid = 0.0;   // max over rows of |value| / (1 + |cst|)
  double worst() const;
};
ResidualReport check_assignment(const FeasibilityProblem& p, const VecR& x);

}  // namespace isac::conic
