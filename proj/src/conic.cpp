#include "isac/conic.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

namespace isac::conic {

namespace {

// Canonical entry order (and duplicate merge) keeps structurally identical
// coefficient lists bitwise identical, which the solver uses to share work
// between parameters entering a block through the same pattern.
void normalize(std::vector<HermEntry>& v) {
  std::sort(v.begin(), v.end(), [](const HermEntry& a, const HermEntry& b) {
    return a.j != b.j ? a.j < b.j : a.i < b.i;
  });
  size_t out = 0;
  for (size_t k = 0; k < v.size(); ++k) {
    if (out > 0 && v[out - 1].i == v[k].i && v[out - 1].j == v[k].j)
      v[out - 1].c += v[k].c;
    else
      v[out++] = v[k];
  }
  v.resize(out);
  v.erase(std::remove_if(v.begin(), v.end(),
                         [](const HermEntry& e) { return e.c == cxd(0.0, 0.0); }),
          v.end());
}

void add_scaled(std::vector<HermEntry>& dst, const std::vector<HermEntry>& src, cxd a) {
  for (const auto& e : src) dst.push_back({e.i, e.j, a * e.c});
}

// Upper-stored list expanded to all (i,j) including conjugate mirrors.
std::vector<HermEntry> full_entries(const std::vector<HermEntry>& up) {
  std::vector<HermEntry> out;
  for (const auto& e : up) {
    out.push_back(e);
    if (e.i != e.j) out.push_back({e.j, e.i, std::conj(e.c)});
  }
  return out;
}

}  // namespace

HermExpr HermExpr::zero(int n) {
  HermExpr e;
  e.dim = n;
  e.cst = MatC::Zero(n, n);
  return e;
}

HermExpr HermExpr::constant(const MatC& c) {
  HermExpr e;
  e.dim = int(c.rows());
  e.cst = c;
  return e;
}

VecExpr VecExpr::zero(int n) {
  VecExpr e;
  e.dim = n;
  e.cst = VecC::Zero(n);
  return e;
}

VecExpr VecExpr::constant(const VecC& c) {
  VecExpr e;
  e.dim = int(c.size());
  e.cst = c;
  return e;
}

LinExpr LinExpr::constant(double c) {
  LinExpr e;
  e.cst = c;
  return e;
}

LinExpr LinExpr::var(int param, double scale) {
  LinExpr e;
  e.coeff[param] = scale;
  return e;
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  cst += o.cst;
  for (const auto& [p, v] : o.coeff) coeff[p] += v;
  return *this;
}

LinExpr& LinExpr::operator*=(double a) {
  cst *= a;
  for (auto& [p, v] : coeff) v *= a;
  return *this;
}

HermExpr operator+(const HermExpr& a, const HermExpr& b) {
  if (a.dim != b.dim) throw InvalidInput("HermExpr: dimension mismatch");
  HermExpr out = a;
  out.cst += b.cst;
  for (const auto& [p, ents] : b.coeff) add_scaled(out.coeff[p], ents, 1.0);
  for (auto& [p, ents] : out.coeff) normalize(ents);
  return out;
}

HermExpr operator-(const HermExpr& a, const HermExpr& b) { return a + (-1.0) * b; }

HermExpr operator*(double a, const HermExpr& e) {
  HermExpr out = e;
  out.cst *= a;
  for (auto& [p, ents] : out.coeff)
    for (auto& en : ents) en.c *= a;
  return out;
}

LinExpr operator+(const LinExpr& a, const LinExpr& b) {
  LinExpr out = a;
  out += b;
  return out;
}

LinExpr operator-(const LinExpr& a, const LinExpr& b) {
  LinExpr nb = b;
  nb *= -1.0;
  return a + nb;
}

LinExpr operator*(double a, const LinExpr& e) {
  LinExpr out = e;
  out *= a;
  return out;
}

HermExpr conj_expr(const HermExpr& e) {
  // conj of a Hermitian matrix is its transpose: upper entry (i,j,c) becomes
  // lower (j,i,c), i.e. upper (i,j,conj(c)) stays upper-stored.
  HermExpr out;
  out.dim = e.dim;
  out.cst = e.cst.conjugate();
  for (const auto& [p, ents] : e.coeff) {
    auto& dst = out.coeff[p];
    for (const auto& en : ents) dst.push_back({en.i, en.j, std::conj(en.c)});
    normalize(dst);
  }
  return out;
}

HermExpr kron_conj_fixed(const HermExpr& q, const MatC& f) {
  const int mr = int(f.rows());
  HermExpr out = HermExpr::zero(q.dim * mr);
  // kron(conj(Q), F)
  for (int a = 0; a < q.dim; ++a)
    for (int b = 0; b < q.dim; ++b)
      out.cst.block(a * mr, b * mr, mr, mr) = std::conj(q.cst(a, b)) * f;
  for (const auto& [p, ents] : q.coeff) {
    auto& dst = out.coeff[p];
    for (const auto& en : full_entries(ents)) {
      int a = en.i, b = en.j;
      cxd qc = std::conj(en.c);
      if (a == b) {
        for (int r = 0; r < mr; ++r)
          for (int s = r; s < mr; ++s)
            dst.push_back({a * mr + r, a * mr + s, qc * f(r, s)});
      } else if (a < b) {
        for (int r = 0; r < mr; ++r)
          for (int s = 0; s < mr; ++s)
            dst.push_back({a * mr + r, b * mr + s, qc * f(r, s)});
      }  // a > b is the conjugate mirror of a < b; skip
    }
    normalize(dst);
  }
  return out;
}

HermExpr kron_fixed_conj(const MatC& q, const HermExpr& f) {
  const int mt = int(q.rows());
  const int mr = f.dim;
  HermExpr out = HermExpr::zero(mt * mr);
  for (int a = 0; a < mt; ++a)
    for (int b = 0; b < mt; ++b)
      out.cst.block(a * mr, b * mr, mr, mr) = std::conj(q(a, b)) * f.cst;
  for (const auto& [p, ents] : f.coeff) {
    auto& dst = out.coeff[p];
    auto full = full_entries(ents);
    for (int a = 0; a < mt; ++a) {
      // diagonal kron block: keep upper part only
      cxd qa = std::conj(q(a, a));
      if (qa != cxd(0.0, 0.0))
        for (const auto& en : ents)
          dst.push_back({a * mr + en.i, a * mr + en.j, qa * en.c});
      for (int b = a + 1; b < mt; ++b) {
        cxd qc = std::conj(q(a, b));
        if (qc == cxd(0.0, 0.0)) continue;
        for (const auto& en : full)
          dst.push_back({a * mr + en.i, b * mr + en.j, qc * en.c});
      }
    }
    normalize(dst);
  }
  return out;
}

HermExpr congruence(const MatC& s, const HermExpr& e) {
  const int n = e.dim;
  if (s.rows() != n || s.cols() != n) throw InvalidInput("congruence: size mismatch");
  bool scaled_id = true;
  for (int i = 0; i < n && scaled_id; ++i)
    for (int j = 0; j < n && scaled_id; ++j)
      if (i != j ? s(i, j) != cxd(0.0, 0.0) : s(i, i) != s(0, 0)) scaled_id = false;
  HermExpr out;
  out.dim = n;
  if (scaled_id) {
    double c2 = (s(0, 0) * s(0, 0)).real();
    out = c2 * e;
    out.cst = c2 * e.cst;
    return out;
  }
  out.cst = s * e.cst * s;
  for (const auto& [p, ents] : e.coeff) {
    MatC cp = MatC::Zero(n, n);
    for (const auto& en : full_entries(ents)) cp(en.i, en.j) += en.c;
    MatC t = s * cp * s;
    auto& dst = out.coeff[p];
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i)
        if (t(i, j) != cxd(0.0, 0.0)) dst.push_back({i, j, t(i, j)});
    normalize(dst);
  }
  return out;
}

VecExpr apply_vec(const HermExpr& e, const VecC& v) {
  VecExpr out = VecExpr::zero(e.dim);
  out.cst = e.cst * v;
  for (const auto& [p, ents] : e.coeff) {
    VecC y = VecC::Zero(e.dim);
    for (const auto& en : full_entries(ents)) y(en.i) += en.c * v(en.j);
    out.coeff[p] = y;
  }
  return out;
}

VecExpr mat_vec(const MatC& a, const VecExpr& v) {
  if (int(a.cols()) != v.dim) throw InvalidInput("mat_vec: size mismatch");
  VecExpr out = VecExpr::zero(int(a.rows()));
  out.cst = a * v.cst;
  for (const auto& [p, c] : v.coeff) out.coeff[p] = a * c;
  return out;
}

LinExpr herm_entry_re(const HermExpr& e, int i, int j) {
  if (i > j) std::swap(i, j);  // Hermitian: Re is mirror-symmetric
  LinExpr out;
  out.cst = e.cst(i, j).real();
  for (const auto& [p, ents] : e.coeff) {
    double acc = 0.0;
    for (const auto& en : ents)
      if (en.i == i && en.j == j) acc += en.c.real();
    if (acc != 0.0) out.coeff[p] += acc;
  }
  return out;
}

LinExpr herm_entry_im(const HermExpr& e, int i, int j) {
  double sign = 1.0;
  if (i > j) {  // Hermitian: Im flips across the diagonal
    std::swap(i, j);
    sign = -1.0;
  }
  LinExpr out;
  if (i == j) return out;
  out.cst = sign * e.cst(i, j).imag();
  for (const auto& [p, ents] : e.coeff) {
    double acc = 0.0;
    for (const auto& en : ents)
      if (en.i == i && en.j == j) acc += sign * en.c.imag();
    if (acc != 0.0) out.coeff[p] += acc;
  }
  return out;
}

LinExpr vec_entry_re(const VecExpr& e, int i) {
  LinExpr out;
  out.cst = e.cst(i).real();
  for (const auto& [p, c] : e.coeff) {
    const double a = c(i).real();
    if (a != 0.0) out.coeff[p] += a;
  }
  return out;
}

LinExpr vec_entry_im(const VecExpr& e, int i) {
  LinExpr out;
  out.cst = e.cst(i).imag();
  for (const auto& [p, c] : e.coeff) {
    const double a = c(i).imag();
    if (a != 0.0) out.coeff[p] += a;
  }
  return out;
}

LinExpr quad_form(const HermExpr& e, const VecC& v) {
  LinExpr out;
  out.cst = (v.adjoint() * e.cst * v)(0).real();
  for (const auto& [p, ents] : e.coeff) {
    double acc = 0.0;
    for (const auto& en : ents) {
      if (en.i == en.j)
        acc += en.c.real() * std::norm(v(en.i));
      else
        acc += 2.0 * (std::conj(v(en.i)) * en.c * v(en.j)).real();
    }
    if (acc != 0.0) out.coeff[p] += acc;
  }
  return out;
}

LinExpr trace_expr(const HermExpr& e) {
  LinExpr out;
  out.cst = e.cst.trace().real();
  for (const auto& [p, ents] : e.coeff) {
    double acc = 0.0;
    for (const auto& en : ents)
      if (en.i == en.j) acc += en.c.real();
    if (acc != 0.0) out.coeff[p] += acc;
  }
  return out;
}

LinExpr frob_inner_expr(const MatC& a, const HermExpr& e) {
  if (a.rows() != e.dim || a.cols() != e.dim)
    throw InvalidInput("frob_inner_expr: size mismatch");
  LinExpr out;
  out.cst = (a * e.cst).trace().real();
  for (const auto& [p, ents] : e.coeff) {
    double acc = 0.0;
    for (const auto& en : ents) {
      if (en.i == en.j)
        acc += a(en.i, en.i).real() * en.c.real();
      else
        // entry fills (i,j) and its conjugate at (j,i)
        acc += 2.0 * (a(en.j, en.i) * en.c).real();
    }
    if (acc != 0.0) out.coeff[p] += acc;
  }
  return out;
}

HermExpr arrow(const HermExpr& a, const VecExpr& b, const LinExpr& c) {
  if (b.dim != a.dim) throw InvalidInput("arrow: border size mismatch");
  const int n = a.dim;
  HermExpr out = HermExpr::zero(n + 1);
  out.cst.topLeftCorner(n, n) = a.cst;
  out.cst.block(0, n, n, 1) = b.cst;
  out.cst.block(n, 0, 1, n) = b.cst.adjoint();
  out.cst(n, n) = c.cst;
  for (const auto& [p, ents] : a.coeff) add_scaled(out.coeff[p], ents, 1.0);
  for (const auto& [p, v] : b.coeff) {
    auto& dst = out.coeff[p];
    for (int i = 0; i < n; ++i)
      if (v(i) != cxd(0.0, 0.0)) dst.push_back({i, n, v(i)});
  }
  for (const auto& [p, v] : c.coeff)
    if (v != 0.0) out.coeff[p].push_back({n, n, cxd(v, 0.0)});
  for (auto& [p, ents] : out.coeff) normalize(ents);
  return out;
}

HermExpr scaled_identity(int param, int n, double scale) {
  HermExpr out = HermExpr::zero(n);
  auto& dst = out.coeff[param];
  for (int i = 0; i < n; ++i) dst.push_back({i, i, cxd(scale, 0.0)});
  return out;
}

int FeasibilityProblem::add_matrix_var(const std::string& name, int dim, bool psd) {
  MatrixVarInfo info{name, dim, n_params_, psd};
  n_params_ += dim * dim;
  matrix_vars_.push_back(info);
  int id = int(matrix_vars_.size()) - 1;
  if (psd) add_lmi(name + "_psd", matrix_expr(id));
  return id;
}

int FeasibilityProblem::add_scalar_var(const std::string& name, bool nonneg) {
  ScalarVarInfo info{name, n_params_, nonneg};
  n_params_ += 1;
  scalar_vars_.push_back(info);
  int id = int(scalar_vars_.size()) - 1;
  if (nonneg) add_linear_ge(name + "_nonneg", LinExpr::var(info.offset));
  return id;
}

namespace {
int pair_param(const MatrixVarInfo& v, int i, int j) {  // i < j
  return v.offset + v.dim + 2 * ((j * (j - 1)) / 2 + i);
}
}  // namespace

HermExpr FeasibilityProblem::matrix_expr(int var) const {
  const auto& v = matrix_vars_.at(var);
  HermExpr e = HermExpr::zero(v.dim);
  for (int i = 0; i < v.dim; ++i)
    e.coeff[v.offset + i].push_back({i, i, cxd(1.0, 0.0)});
  for (int j = 1; j < v.dim; ++j)
    for (int i = 0; i < j; ++i) {
      e.coeff[pair_param(v, i, j)].push_back({i, j, cxd(1.0, 0.0)});
      e.coeff[pair_param(v, i, j) + 1].push_back({i, j, cxd(0.0, 1.0)});
    }
  return e;
}

LinExpr FeasibilityProblem::scalar_expr(int var) const {
  return LinExpr::var(scalar_vars_.at(var).offset);
}

void FeasibilityProblem::add_lmi(const std::string& name, HermExpr e) {
  lmis_.push_back({name, std::move(e)});
}

void FeasibilityProblem::add_soc(const std::string& name, std::vector<LinExpr> rows,
                                 LinExpr bound) {
  socs_.push_back({name, std::move(rows), std::move(bound)});
}

void FeasibilityProblem::add_linear_ge(const std::string& name, LinExpr e) {
  linear_.push_back({name, std::move(e), false});
}

void FeasibilityProblem::add_linear_eq(const std::string& name, LinExpr e) {
  linear_.push_back({name, std::move(e), true});
}

MatC FeasibilityProblem::extract_matrix(int var, const VecR& x) const {
  const auto& v = matrix_vars_.at(var);
  MatC m(v.dim, v.dim);
  for (int i = 0; i < v.dim; ++i) m(i, i) = x(v.offset + i);
  for (int j = 1; j < v.dim; ++j)
    for (int i = 0; i < j; ++i) {
      cxd c(x(pair_param(v, i, j)), x(pair_param(v, i, j) + 1));
      m(i, j) = c;
      m(j, i) = std::conj(c);
    }
  return m;
}

void FeasibilityProblem::assign_matrix(int var, const MatC& m, VecR& x) const {
  const auto& v = matrix_vars_.at(var);
  if (m.rows() != v.dim || m.cols() != v.dim)
    throw InvalidInput("assign_matrix: size mismatch");
  for (int i = 0; i < v.dim; ++i) x(v.offset + i) = m(i, i).real();
  for (int j = 1; j < v.dim; ++j)
    for (int i = 0; i < j; ++i) {
      x(pair_param(v, i, j)) = m(i, j).real();
      x(pair_param(v, i, j) + 1) = m(i, j).imag();
    }
}

MatC eval_herm(const HermExpr& e, const VecR& x) {
  MatC m = e.cst;
  for (const auto& [p, ents] : e.coeff) {
    double v = x(p);
    if (v == 0.0) continue;
    for (const auto& en : ents) {
      m(en.i, en.j) += v * en.c;
      if (en.i != en.j) m(en.j, en.i) += v * std::conj(en.c);
    }
  }
  return m;
}

VecC eval_vec(const VecExpr& e, const VecR& x) {
  VecC v = e.cst;
  for (const auto& [p, c] : e.coeff) v += x(p) * c;
  return v;
}

double eval_lin(const LinExpr& e, const VecR& x) {
  double v = e.cst;
  for (const auto& [p, c] : e.coeff) v += x(p) * c;
  return v;
}

MatR embed_complex(const MatC& h) {
  const int n = int(h.rows());
  MatR s(2 * n, 2 * n);
  s.topLeftCorner(n, n) = h.real();
  s.bottomRightCorner(n, n) = h.real();
  s.topRightCorner(n, n) = -h.imag();
  s.bottomLeftCorner(n, n) = h.imag();
  return s;
}

double ResidualReport::worst() const {
  return std::min(std::min(lmi_margin, soc_margin),
                  std::min(lin_ge_margin, -lin_eq_resid));
}

ResidualReport check_assignment(const FeasibilityProblem& p, const VecR& x) {
  ResidualReport r;
  r.lmi_margin = r.soc_margin = r.lin_ge_margin = 1e300;
  r.lin_eq_resid = 0.0;
  for (const auto& lmi : p.lmis()) {
    MatC m = hermitian_part(eval_herm(lmi.expr, x));
    Eigen::SelfAdjointEigenSolver<MatC> es(m, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    r.lmi_margin = std::min(r.lmi_margin, lo / (1.0 + norm));
  }
  for (const auto& soc : p.socs()) {
    double nn = 0.0;
    for (const auto& row : soc.rows) {
      double v = eval_lin(row, x);
      nn += v * v;
    }
    double b = eval_lin(soc.bound, x);
    r.soc_margin = std::min(r.soc_margin, (b - std::sqrt(nn)) / (1.0 + std::fabs(b)));
  }
  for (const auto& lin : p.linear()) {
    double v = eval_lin(lin.expr, x);
    double scale = 1.0 + std::fabs(lin.expr.cst) + std::fabs(v);
    if (lin.equality)
      r.lin_eq_resid = std::max(r.lin_eq_resid, std::fabs(v) / scale);
    else
      r.lin_ge_margin = std::min(r.lin_ge_margin, v / scale);
  }
  if (p.lmis().empty()) r.lmi_margin = 0.0;
  if (p.socs().empty()) r.soc_margin = 0.0;
  if (p.linear().empty()) r.lin_ge_margin = 0.0;
  return r;
}

std::string FeasibilityProblem::dump_json() const {
  nlohmann::ordered_json doc;
  doc["format"] = "conic-ir/1";
  doc["n_params"] = n_params_;
  auto dump_lin = [](const LinExpr& e) {
    nlohmann::ordered_json o;
    o["cst"] = e.cst;
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto& [p, v] : e.coeff) terms.push_back({p, v});
    o["terms"] = terms;
    return o;
  };
  nlohmann::ordered_json vars = nlohmann::ordered_json::array();
  for (const auto& v : matrix_vars_)
    vars.push_back({{"name", v.name},
                    {"dim", v.dim},
                    {"offset", v.offset},
                    {"kind", v.psd ? "psd_matrix" : "matrix"}});
  for (const auto& v : scalar_vars_)
    vars.push_back({{"name", v.name},
                    {"offset", v.offset},
                    {"kind", v.nonneg ? "nonneg_scalar" : "scalar"}});
  doc["variables"] = vars;
  nlohmann::ordered_json lmis = nlohmann::ordered_json::array();
  for (const auto& lmi : lmis_) {
    nlohmann::ordered_json o;
    o["name"] = lmi.name;
    o["dim"] = lmi.expr.dim;
    nlohmann::ordered_json cst = nlohmann::ordered_json::array();
    for (int j = 0; j < lmi.expr.dim; ++j)
      for (int i = 0; i <= j; ++i) {
        cxd c = lmi.expr.cst(i, j);
        if (c != cxd(0.0, 0.0)) cst.push_back({i, j, c.real(), c.imag()});
      }
    o["cst_upper"] = cst;
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto& [p, ents] : lmi.expr.coeff) {
      nlohmann::ordered_json t;
      t["param"] = p;
      nlohmann::ordered_json es = nlohmann::ordered_json::array();
      for (const auto& e : ents) es.push_back({e.i, e.j, e.c.real(), e.c.imag()});
      t["entries"] = es;
      terms.push_back(t);
    }
    o["terms"] = terms;
    lmis.push_back(o);
  }
  doc["lmis"] = lmis;
  nlohmann::ordered_json socs = nlohmann::ordered_json::array();
  for (const auto& soc : socs_) {
    nlohmann::ordered_json o;
    o["name"] = soc.name;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : soc.rows) rows.push_back(dump_lin(row));
    o["rows"] = rows;
    o["bound"] = dump_lin(soc.bound);
    socs.push_back(o);
  }
  doc["socs"] = socs;
  nlohmann::ordered_json lins = nlohmann::ordered_json::array();
  for (const auto& lin : linear_) {
    nlohmann::ordered_json o;
    o["name"] = lin.name;
    o["kind"] = lin.equality ? "eq" : "ge";
    o["expr"] = dump_lin(lin.expr);
    lins.push_back(o);
  }
  doc["linear"] = lins;
  return doc.dump(2) + "\n";
}

}  // namespace isac::conic
