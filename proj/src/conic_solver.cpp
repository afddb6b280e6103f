#include "isac/conic_solve.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

// Homogeneous self-dual interior-point method over the embedded real cones.
// The complex Hermitian blocks are realized as real symmetric svec blocks,
// second-order cones and linear rows pass through directly.  Nesterov-Todd
// scaling, Mehrotra predictor-corrector, dense LU on the reduced saddle
// system with static regularization plus iterative refinement.
//
// Feasibility is only ever declared after the candidate point passes the
// independent dense re-check (check_assignment), so solver-internal linear
// algebra never vouches for itself.  Infeasibility requires a normalized
// Farkas certificate.

namespace isac::conic {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int svec_len(int n) { return n * (n + 1) / 2; }
int svec_index(int r, int c) { return c * (c + 1) / 2 + r; }  // r <= c

const double kSqrt2 = std::sqrt(2.0);

// Matrix-form triplet of an embedded symmetric coefficient (r <= c).
struct MTrip {
  int r = 0, c = 0;
  double v = 0.0;
};

// One distinct coefficient pattern within a PSD block, kept both as matrix
// triplets (for scaled congruences) and svec pairs (for plain matvecs).
struct Proto {
  std::vector<MTrip> mt;
  std::vector<std::pair<int, double>> sv;
};

// Real embedding of a Hermitian coefficient list, as matrix triplets on the
// doubled dimension.  [[Re, -Im], [Im, Re]] with only the upper triangle kept.
void embed_entries(const std::vector<HermEntry>& ents, int nc, double scale,
                   std::vector<MTrip>& out) {
  out.clear();
  for (const auto& en : ents) {
    const double re = en.c.real() * scale;
    const double im = en.c.imag() * scale;
    if (en.i == en.j) {
      out.push_back({en.i, en.i, re});
      out.push_back({en.i + nc, en.i + nc, re});
    } else {
      if (re != 0.0) {
        out.push_back({en.i, en.j, re});
        out.push_back({en.i + nc, en.j + nc, re});
      }
      if (im != 0.0) {
        out.push_back({en.i, en.j + nc, -im});
        out.push_back({en.j, en.i + nc, im});
      }
    }
  }
}

void svec_pairs_of(const std::vector<MTrip>& mt,
                   std::vector<std::pair<int, double>>& out) {
  out.clear();
  for (const auto& t : mt)
    out.push_back({svec_index(t.r, t.c), t.r == t.c ? t.v : kSqrt2 * t.v});
  std::sort(out.begin(), out.end());
  size_t w = 0;
  for (size_t k = 0; k < out.size(); ++k) {
    if (w > 0 && out[w - 1].first == out[k].first)
      out[w - 1].second += out[k].second;
    else
      out[w++] = out[k];
  }
  out.resize(w);
}

void svec_of_dense(const MatR& m, double* out) {
  const int n = int(m.rows());
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < c; ++r) *out++ = kSqrt2 * m(r, c);
    *out++ = m(c, c);
  }
}

void mat_of_svec(const double* v, int n, MatR& m) {
  m.resize(n, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < c; ++r) {
      const double x = *v++ / kSqrt2;
      m(r, c) = x;
      m(c, r) = x;
    }
    m(c, c) = *v++;
  }
}

// Wait-free layout note: svec_of_dense writes column-major upper triangles,
// matching svec_index(r, c) = c(c+1)/2 + r.

struct SparseRow {
  std::vector<std::pair<int, double>> a;  // (param, value); value is -coeff
  double h = 0.0;
};

struct PsdBlock {
  int nc = 0, n = 0, sd = 0, off = 0;
  VecR h;
  std::vector<Proto> protos;
  std::vector<int> pid;    // params entering the block
  std::vector<int> grp;    // prototype index per entry of pid
  std::vector<double> dp;  // column scale per entry of pid
};

struct SocCone {
  int dim = 0, off = 0;
  std::vector<SparseRow> rows;  // rows[0] is the norm bound
  std::vector<int> cols;        // active params, sorted
  std::vector<std::vector<std::pair<int, double>>> rows_local;  // cols-indexed
  MatR ata;                     // sum of row outer products over `cols`
};

struct Realized {
  int m = 0;
  VecR dcol;
  std::vector<SparseRow> lp;  // offset 0..lp.size()
  std::vector<SocCone> socs;
  std::vector<PsdBlock> psd;
  MatR A;  // equality rows (dense; always few)
  VecR b;
  int lp_dim = 0, cone_dim = 0, n_eq = 0;
  double degree = 0.0;
  double gscale = 1.0;  // max column norm of [G; A], for certificate scaling
  VecR hstack;
};

double row_scale_of(double maxabs) {
  if (!(maxabs > 1e-300)) return 1.0;
  return 1.0 / std::clamp(maxabs, 1e-8, 1e8);
}

std::string pattern_key(const std::vector<HermEntry>& ents) {
  std::string key;
  key.reserve(ents.size() * 24);
  for (const auto& en : ents) {
    const double re = en.c.real(), im = en.c.imag();
    key.append(reinterpret_cast<const char*>(&en.i), sizeof(int));
    key.append(reinterpret_cast<const char*>(&en.j), sizeof(int));
    key.append(reinterpret_cast<const char*>(&re), sizeof(double));
    key.append(reinterpret_cast<const char*>(&im), sizeof(double));
  }
  return key;
}

Realized realize(const FeasibilityProblem& p) {
  Realized r;
  r.m = p.n_params();

  // Exact presolve. Cones with degenerate variable structure lower to linear
  // rows: a second-order cone whose rows are all constant is the single row
  // bound - ||c|| >= 0, and an LMI whose coefficients are all real multiples
  // of the identity only shifts the spectrum of its constant part, so it is
  // the row  sum_k a_k x_k + lambda_min(C) >= 0.  Both keep the interior-point
  // iteration away from cone boundaries it would otherwise have to trace.
  std::vector<LinearConstraint> folded;
  std::vector<const SocConstraint*> socs_kept;
  std::vector<const LmiConstraint*> lmis_kept;
  for (const auto& sc : p.socs()) {
    bool all_const = true;
    for (const auto& lr : sc.rows)
      if (!lr.coeff.empty()) {
        all_const = false;
        break;
      }
    if (!all_const) {
      socs_kept.push_back(&sc);
      continue;
    }
    double n2 = 0.0;
    for (const auto& lr : sc.rows) n2 += lr.cst * lr.cst;
    LinearConstraint lc;
    lc.name = sc.name;
    lc.expr = sc.bound;
    lc.expr.cst -= std::sqrt(n2);
    folded.push_back(std::move(lc));
  }
  for (const auto& lm : p.lmis()) {
    bool identity_only = true;
    LinExpr shift;
    for (const auto& [q, ents] : lm.expr.coeff) {
      if (ents.empty()) continue;
      bool idlike = int(ents.size()) == lm.expr.dim;
      if (idlike) {
        const double v0 = ents.front().c.real();
        std::vector<bool> seen(lm.expr.dim, false);
        for (const auto& en : ents) {
          if (en.i != en.j || en.i >= lm.expr.dim || seen[en.i] ||
              en.c.imag() != 0.0 || en.c.real() != v0) {
            idlike = false;
            break;
          }
          seen[en.i] = true;
        }
        if (idlike) shift += LinExpr::var(q, v0);
      }
      if (!idlike) {
        identity_only = false;
        break;
      }
    }
    if (!identity_only) {
      lmis_kept.push_back(&lm);
      continue;
    }
    Eigen::SelfAdjointEigenSolver<MatC> es(lm.expr.cst, Eigen::EigenvaluesOnly);
    shift.cst += lm.expr.dim > 0 ? es.eigenvalues().minCoeff() : 0.0;
    LinearConstraint lc;
    lc.name = lm.name;
    lc.expr = std::move(shift);
    folded.push_back(std::move(lc));
  }
  std::vector<const LinearConstraint*> lin_all;
  for (const auto& lc : p.linear()) lin_all.push_back(&lc);
  for (const auto& lc : folded) lin_all.push_back(&lc);

  // Pass 1: row-scaled sections, still without column scaling.
  for (const LinearConstraint* plc : lin_all) {
    const auto& lc = *plc;
    double mx = std::abs(lc.expr.cst);
    for (const auto& [q, v] : lc.expr.coeff) mx = std::max(mx, std::abs(v));
    const double rs = row_scale_of(mx);
    SparseRow row;
    for (const auto& [q, v] : lc.expr.coeff) row.a.push_back({q, v * rs});
    if (lc.equality) {
      row.h = -lc.expr.cst * rs;  // A x = b with b = -cst
      r.n_eq += 1;
      r.lp.push_back(row);  // staged; moved to A below
      r.lp.back().a.push_back({-1, 0.0});  // marker: equality
    } else {
      for (auto& e : row.a) e.second = -e.second;  // G = -coeff
      row.h = lc.expr.cst * rs;
      r.lp.push_back(row);
    }
  }
  // Separate equalities from inequality rows (marker in last entry).
  std::vector<SparseRow> eq_rows;
  {
    std::vector<SparseRow> ge_rows;
    for (auto& row : r.lp) {
      if (!row.a.empty() && row.a.back().first == -1) {
        row.a.pop_back();
        eq_rows.push_back(std::move(row));
      } else {
        ge_rows.push_back(std::move(row));
      }
    }
    r.lp = std::move(ge_rows);
  }
  r.lp_dim = int(r.lp.size());

  for (const SocConstraint* psc : socs_kept) {
    const auto& sc = *psc;
    SocCone cone;
    cone.dim = 1 + int(sc.rows.size());
    double mx = std::abs(sc.bound.cst);
    for (const auto& [q, v] : sc.bound.coeff) mx = std::max(mx, std::abs(v));
    for (const auto& lr : sc.rows) {
      mx = std::max(mx, std::abs(lr.cst));
      for (const auto& [q, v] : lr.coeff) mx = std::max(mx, std::abs(v));
    }
    const double rs = row_scale_of(mx);
    auto mk = [&](const LinExpr& e) {
      SparseRow row;
      for (const auto& [q, v] : e.coeff) row.a.push_back({q, -v * rs});
      row.h = e.cst * rs;
      return row;
    };
    cone.rows.push_back(mk(sc.bound));
    for (const auto& lr : sc.rows) cone.rows.push_back(mk(lr));
    r.socs.push_back(std::move(cone));
  }

  for (const LmiConstraint* plm : lmis_kept) {
    const auto& lm = *plm;
    PsdBlock b;
    b.nc = lm.expr.dim;
    b.n = 2 * b.nc;
    b.sd = svec_len(b.n);
    double mx = 0.0;
    for (int j = 0; j < b.nc; ++j)
      for (int i = 0; i < b.nc; ++i) mx = std::max(mx, std::abs(lm.expr.cst(i, j)));
    for (const auto& [q, ents] : lm.expr.coeff)
      for (const auto& en : ents) mx = std::max(mx, std::abs(en.c));
    const double rs = row_scale_of(mx);

    const MatR emb = embed_complex(lm.expr.cst) * rs;
    b.h.resize(b.sd);
    svec_of_dense(emb, b.h.data());

    std::unordered_map<std::string, int> seen;
    for (const auto& [q, ents] : lm.expr.coeff) {
      if (ents.empty()) continue;
      auto key = pattern_key(ents);
      auto it = seen.find(key);
      int g;
      if (it == seen.end()) {
        g = int(b.protos.size());
        seen.emplace(std::move(key), g);
        Proto pr;
        embed_entries(ents, b.nc, rs, pr.mt);
        svec_pairs_of(pr.mt, pr.sv);
        b.protos.push_back(std::move(pr));
      } else {
        g = it->second;
      }
      b.pid.push_back(q);
      b.grp.push_back(g);
    }
    r.psd.push_back(std::move(b));
  }

  // Column scaling from the max absolute entry per parameter.
  VecR colmax = VecR::Zero(r.m);
  auto see_rows = [&](const std::vector<SparseRow>& rows) {
    for (const auto& row : rows)
      for (const auto& [q, v] : row.a) colmax(q) = std::max(colmax(q), std::abs(v));
  };
  see_rows(r.lp);
  see_rows(eq_rows);
  for (const auto& cone : r.socs) see_rows(cone.rows);
  for (const auto& b : r.psd) {
    std::vector<double> pmax(b.protos.size(), 0.0);
    for (size_t g = 0; g < b.protos.size(); ++g)
      for (const auto& [k, v] : b.protos[g].sv) pmax[g] = std::max(pmax[g], std::abs(v));
    for (size_t t = 0; t < b.pid.size(); ++t)
      colmax(b.pid[t]) = std::max(colmax(b.pid[t]), pmax[b.grp[t]]);
  }
  r.dcol.resize(r.m);
  for (int q = 0; q < r.m; ++q)
    r.dcol(q) = colmax(q) > 0.0 ? std::clamp(1.0 / std::sqrt(colmax(q)), 1.0, 100.0) : 1.0;

  auto scale_rows = [&](std::vector<SparseRow>& rows) {
    for (auto& row : rows)
      for (auto& [q, v] : row.a) v *= r.dcol(q);
  };
  scale_rows(r.lp);
  scale_rows(eq_rows);
  for (auto& cone : r.socs) scale_rows(cone.rows);
  for (auto& b : r.psd)
    for (size_t t = 0; t < b.pid.size(); ++t) b.dp.push_back(r.dcol(b.pid[t]));

  // Dense equality matrix (row count is always small here).
  r.A.setZero(r.n_eq, r.m);
  r.b.resize(r.n_eq);
  for (int i = 0; i < r.n_eq; ++i) {
    for (const auto& [q, v] : eq_rows[i].a) r.A(i, q) = v;
    r.b(i) = eq_rows[i].h;
  }

  // Cone offsets and stacked constant.
  int off = r.lp_dim;
  for (auto& cone : r.socs) {
    cone.off = off;
    off += cone.dim;
  }
  for (auto& b : r.psd) {
    b.off = off;
    off += b.sd;
  }
  r.cone_dim = off;
  r.hstack.resize(off);
  for (int i = 0; i < r.lp_dim; ++i) r.hstack(i) = r.lp[i].h;
  for (const auto& cone : r.socs)
    for (int k = 0; k < cone.dim; ++k) r.hstack(cone.off + k) = cone.rows[k].h;
  for (const auto& b : r.psd) r.hstack.segment(b.off, b.sd) = b.h;

  r.degree = double(r.lp_dim) + double(r.socs.size());
  for (const auto& b : r.psd) r.degree += b.n;

  // Active columns plus static Gram matrix per second-order cone.
  for (auto& cone : r.socs) {
    std::vector<int> cols;
    for (const auto& row : cone.rows)
      for (const auto& [q, v] : row.a) cols.push_back(q);
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    cone.cols = std::move(cols);
    const int na = int(cone.cols.size());
    cone.ata.setZero(na, na);
    std::unordered_map<int, int> pos;
    for (int i = 0; i < na; ++i) pos[cone.cols[i]] = i;
    VecR tmp(na);
    for (const auto& row : cone.rows) {
      auto& loc = cone.rows_local.emplace_back();
      tmp.setZero();
      for (const auto& [q, v] : row.a) {
        tmp(pos[q]) = v;
        loc.push_back({pos[q], v});
      }
      cone.ata.selfadjointView<Eigen::Lower>().rankUpdate(tmp);
    }
    cone.ata.triangularView<Eigen::StrictlyUpper>() =
        cone.ata.transpose().triangularView<Eigen::StrictlyUpper>();
  }

  // Data scale for Farkas certificate normalization.
  VecR colsq = VecR::Zero(r.m);
  auto acc_rows = [&](const std::vector<SparseRow>& rows) {
    for (const auto& row : rows)
      for (const auto& [q, v] : row.a) colsq(q) += v * v;
  };
  acc_rows(r.lp);
  for (const auto& cone : r.socs) acc_rows(cone.rows);
  for (const auto& b : r.psd)
    for (size_t t = 0; t < b.pid.size(); ++t) {
      double s = 0.0;
      for (const auto& [k, v] : b.protos[b.grp[t]].sv) s += v * v;
      colsq(b.pid[t]) += s * b.dp[t] * b.dp[t];
    }
  for (int i = 0; i < r.n_eq; ++i) colsq += r.A.row(i).cwiseAbs2().transpose();
  r.gscale = std::max(1.0, colsq.size() ? std::sqrt(colsq.maxCoeff()) : 1.0);
  return r;
}

// Per-iteration Nesterov-Todd scaling state.
struct LpScale {
  VecR w;  // sqrt(s/z) elementwise
};
struct SocScale {
  double eta = 1.0;
  VecR wbar;  // unit hyperbolic vector
  VecR u;     // J wbar
};
struct PsdScale {
  MatR R, Rinv, P, S2;  // P = (R R^T)^{-1}, S2 = R R^T
  VecR lam;             // scaling eigenvalues, length n
};

struct Scaling {
  LpScale lp;
  std::vector<SocScale> soc;
  std::vector<PsdScale> psd;
  bool ok = true;
};

class Hsd {
 public:
  Hsd(const FeasibilityProblem& prob, const Realized& r, const SolveTolerances& tol)
      : prob_(prob), r_(r), tol_(tol),
        trace_(std::getenv("ISAC_SOLVER_TRACE") != nullptr) {}

  FeasibilityOutcome run();

 private:
  const FeasibilityProblem& prob_;
  const Realized& r_;
  SolveTolerances tol_;
  bool trace_ = false;

  // iterates
  VecR x_, y_, z_, s_, lam_;
  double tau_ = 1.0, kap_ = 1.0;
  Scaling W_;
  MatR K_;
  Eigen::PartialPivLU<MatR> lu_;

  struct Dirs {
    VecR x, y, z;
  };

  // --- cone-wise vector ops on stacked cone vectors ---

  VecR cone_e() const {
    VecR e = VecR::Zero(r_.cone_dim);
    for (int i = 0; i < r_.lp_dim; ++i) e(i) = 1.0;
    for (const auto& c : r_.socs) e(c.off) = 1.0;
    for (const auto& b : r_.psd)
      for (int i = 0; i < b.n; ++i) e(b.off + svec_index(i, i)) = 1.0;
    return e;
  }

  double min_eig(const VecR& v) const {
    double me = kInf;
    for (int i = 0; i < r_.lp_dim; ++i) me = std::min(me, v(i));
    for (const auto& c : r_.socs)
      me = std::min(me, v(c.off) - v.segment(c.off + 1, c.dim - 1).norm());
    MatR M;
    for (const auto& b : r_.psd) {
      mat_of_svec(v.data() + b.off, b.n, M);
      Eigen::SelfAdjointEigenSolver<MatR> es(M, Eigen::EigenvaluesOnly);
      me = std::min(me, es.eigenvalues().minCoeff());
    }
    if (r_.cone_dim == 0) me = 0.0;
    return me;
  }

  bool update_scaling() {
    W_.ok = true;
    W_.lp.w.resize(r_.lp_dim);
    for (int i = 0; i < r_.lp_dim; ++i) {
      if (!(s_(i) > 0.0) || !(z_(i) > 0.0)) return false;
      W_.lp.w(i) = std::sqrt(s_(i) / z_(i));
      lam_(i) = std::sqrt(s_(i) * z_(i));
    }
    W_.soc.resize(r_.socs.size());
    for (size_t k = 0; k < r_.socs.size(); ++k) {
      const auto& c = r_.socs[k];
      auto s = s_.segment(c.off, c.dim);
      auto z = z_.segment(c.off, c.dim);
      const double a2 = s(0) * s(0) - s.tail(c.dim - 1).squaredNorm();
      const double b2 = z(0) * z(0) - z.tail(c.dim - 1).squaredNorm();
      if (!(a2 > 0.0) || !(b2 > 0.0)) return false;
      const double a = std::sqrt(a2), b = std::sqrt(b2);
      VecR sb = s / a, zb = z / b;
      const double gam = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
      auto& w = W_.soc[k];
      w.wbar = sb;
      w.wbar(0) += zb(0);
      w.wbar.tail(c.dim - 1) -= zb.tail(c.dim - 1);
      w.wbar /= 2.0 * gam;
      // wbar is the J-normalized midpoint, whose reflection maps z all the
      // way onto s. The scaling must map both slacks onto the same point,
      // so take the Jordan square root (again J-normalized: its reflection
      // is the inverse map).
      const double hc = std::sqrt(2.0 * (1.0 + w.wbar(0)));
      w.wbar(0) += 1.0;
      w.wbar /= hc;
      w.eta = std::sqrt(a / b);
      w.u = w.wbar;
      w.u.tail(c.dim - 1) = -w.u.tail(c.dim - 1);
      // lambda = W z, in the cancellation-free closed form: evaluating the
      // reflection directly loses every significant digit once the block
      // nears its boundary.
      const double d = sb(0) + zb(0) + 2.0 * gam;
      auto l = lam_.segment(c.off, c.dim);
      l(0) = gam;
      l.tail(c.dim - 1) = ((gam + zb(0)) / d) * sb.tail(c.dim - 1) +
                          ((gam + sb(0)) / d) * zb.tail(c.dim - 1);
      l *= std::sqrt(a * b);
    }
    W_.psd.resize(r_.psd.size());
    MatR S, Z;
    for (size_t k = 0; k < r_.psd.size(); ++k) {
      const auto& b = r_.psd[k];
      mat_of_svec(s_.data() + b.off, b.n, S);
      mat_of_svec(z_.data() + b.off, b.n, Z);
      // Symmetric square roots via eigendecomposition: slack blocks sit close
      // to singular whenever a matrix variable heads for low rank, which is
      // the expected optimum here, and a Cholesky would reject those points.
      Eigen::SelfAdjointEigenSolver<MatR> evs(S), evz(Z);
      if (evs.info() != Eigen::Success || evz.info() != Eigen::Success)
        return false;
      if (!(evs.eigenvalues().minCoeff() > 0.0) ||
          !(evz.eigenvalues().minCoeff() > 0.0))
        return false;
      const VecR ss = evs.eigenvalues().cwiseSqrt();
      const VecR sz = evz.eigenvalues().cwiseSqrt();
      MatR Ls = evs.eigenvectors() * ss.asDiagonal() * evs.eigenvectors().transpose();
      MatR Lz = evz.eigenvectors() * sz.asDiagonal() * evz.eigenvectors().transpose();
      MatR B = Lz * Ls;
      Eigen::SelfAdjointEigenSolver<MatR> es(B.transpose() * B);
      if (es.info() != Eigen::Success) return false;
      auto& w = W_.psd[k];
      w.lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();  // singular values of B
      if (!(w.lam.minCoeff() > 0.0)) return false;
      VecR li = w.lam.cwiseSqrt();  // lambda^{1/2}
      MatR V = es.eigenvectors();
      w.R.noalias() = Ls * V;
      w.R *= li.cwiseInverse().asDiagonal();
      // Rinv = lam^{1/2} V^T Ls^{-1}
      MatR Lsi = evs.eigenvectors() * ss.cwiseInverse().asDiagonal() *
                 evs.eigenvectors().transpose();
      w.Rinv.noalias() = li.asDiagonal() * V.transpose() * Lsi;
      w.S2.noalias() = w.R * w.R.transpose();
      w.P.noalias() = w.Rinv.transpose() * w.Rinv;
      for (int i = 0; i < b.n; ++i) lam_(b.off + svec_index(i, i)) = w.lam(i);
      for (int c2 = 0; c2 < b.n; ++c2)
        for (int r2 = 0; r2 < c2; ++r2) lam_(b.off + svec_index(r2, c2)) = 0.0;
    }
    return true;
  }

  // The step map keeps both slack stacks inside their cones in exact
  // arithmetic, but an ill-conditioned scaling lets rounding push a block a
  // hair across the boundary, and the next scaling would then be built from
  // a point outside the cone. Shift any such block back to a strictly
  // interior point; the shift is of rounding size relative to the block.
  void repair_interior(VecR& v) const {
    for (int i = 0; i < r_.lp_dim; ++i)
      if (!(v(i) > 0.0)) v(i) = 1e-14 * std::max(1.0, std::abs(v(i)));
    for (const auto& c : r_.socs) {
      auto seg = v.segment(c.off, c.dim);
      const double eb = 1e-14 * std::max(1.0, seg.cwiseAbs().maxCoeff());
      const double me = seg(0) - seg.tail(c.dim - 1).norm();
      if (me < eb) seg(0) += eb - me;
    }
    MatR M;
    for (const auto& b : r_.psd) {
      mat_of_svec(v.data() + b.off, b.n, M);
      const double eb = 1e-14 * std::max(1.0, M.cwiseAbs().maxCoeff());
      Eigen::SelfAdjointEigenSolver<MatR> es(M, Eigen::EigenvaluesOnly);
      if (es.info() != Eigen::Success) continue;
      const double me = es.eigenvalues().minCoeff();
      if (me < eb)
        for (int i = 0; i < b.n; ++i) v(b.off + svec_index(i, i)) += eb - me;
    }
  }

  // W v = eta (2 wbar (wbar' v) - J v); W^{-1} v = (2 u (u' v) - J v) / eta.
  void soc_apply(const SocScale& w, VecR& stack, int off, int dim, bool inv) const {
    auto v = stack.segment(off, dim);
    VecR jv = v;
    jv.tail(dim - 1) = -jv.tail(dim - 1);
    if (!inv) {
      const double t = 2.0 * w.wbar.dot(v);
      v = w.wbar * t - jv;
      v *= w.eta;
    } else {
      const double t = 2.0 * w.u.dot(v);
      v = w.u * t - jv;
      v /= w.eta;
    }
  }

  // Stacked scaling applications.  kind: 0 -> W, 1 -> W^T, 2 -> W^{-1},
  // 3 -> W^{-T}, 4 -> (W^T W)^{-1}, 5 -> W^T W.
  void apply_scaling(VecR& v, int kind) const {
    for (int i = 0; i < r_.lp_dim; ++i) {
      const double w = W_.lp.w(i);
      if (kind == 0 || kind == 1)
        v(i) *= w;
      else if (kind == 2 || kind == 3)
        v(i) /= w;
      else if (kind == 4)
        v(i) /= w * w;
      else
        v(i) *= w * w;
    }
    for (size_t k = 0; k < r_.socs.size(); ++k) {
      const auto& c = r_.socs[k];
      if (kind == 0 || kind == 1) {
        soc_apply(W_.soc[k], v, c.off, c.dim, false);
      } else if (kind == 2 || kind == 3) {
        soc_apply(W_.soc[k], v, c.off, c.dim, true);
      } else if (kind == 4) {
        soc_apply(W_.soc[k], v, c.off, c.dim, true);
        soc_apply(W_.soc[k], v, c.off, c.dim, true);
      } else {
        soc_apply(W_.soc[k], v, c.off, c.dim, false);
        soc_apply(W_.soc[k], v, c.off, c.dim, false);
      }
    }
    MatR M, T;
    for (size_t k = 0; k < r_.psd.size(); ++k) {
      const auto& b = r_.psd[k];
      const auto& w = W_.psd[k];
      mat_of_svec(v.data() + b.off, b.n, M);
      switch (kind) {
        case 0:  // R^T M R
          T.noalias() = w.R.transpose() * M;
          M.noalias() = T * w.R;
          break;
        case 1:  // R M R^T
          T.noalias() = w.R * M;
          M.noalias() = T * w.R.transpose();
          break;
        case 2:  // R^{-T} M R^{-1}
          T.noalias() = w.Rinv.transpose() * M;
          M.noalias() = T * w.Rinv;
          break;
        case 3:  // R^{-1} M R^{-T}
          T.noalias() = w.Rinv * M;
          M.noalias() = T * w.Rinv.transpose();
          break;
        case 4:  // P M P
          T.noalias() = w.P * M;
          M.noalias() = T * w.P;
          break;
        default:  // S2 M S2
          T.noalias() = w.S2 * M;
          M.noalias() = T * w.S2;
          break;
      }
      M = 0.5 * (M + M.transpose()).eval();
      svec_of_dense(M, v.data() + b.off);
    }
  }

  // Jordan-algebra pieces on stacked vectors.
  VecR jordan_mul(const VecR& a, const VecR& c) const {
    VecR out = VecR::Zero(r_.cone_dim);
    for (int i = 0; i < r_.lp_dim; ++i) out(i) = a(i) * c(i);
    for (const auto& q : r_.socs) {
      auto u = a.segment(q.off, q.dim);
      auto v = c.segment(q.off, q.dim);
      out(q.off) = u.dot(v);
      out.segment(q.off + 1, q.dim - 1) =
          u(0) * v.tail(q.dim - 1) + v(0) * u.tail(q.dim - 1);
    }
    MatR U, V, W2;
    for (const auto& b : r_.psd) {
      mat_of_svec(a.data() + b.off, b.n, U);
      mat_of_svec(c.data() + b.off, b.n, V);
      W2.noalias() = U * V;
      W2 = 0.5 * (W2 + W2.transpose()).eval();
      svec_of_dense(W2, out.data() + b.off);
    }
    return out;
  }

  // Solve lambda o g = w for g, using the diagonal structure of lambda.
  VecR jordan_solve_lam(const VecR& w) const {
    VecR g = VecR::Zero(r_.cone_dim);
    for (int i = 0; i < r_.lp_dim; ++i) g(i) = w(i) / lam_(i);
    for (const auto& q : r_.socs) {
      auto l = lam_.segment(q.off, q.dim);
      auto v = w.segment(q.off, q.dim);
      const double det = l(0) * l(0) - l.tail(q.dim - 1).squaredNorm();
      const double g0 = (l(0) * v(0) - l.tail(q.dim - 1).dot(v.tail(q.dim - 1))) / det;
      g(q.off) = g0;
      g.segment(q.off + 1, q.dim - 1) =
          (v.tail(q.dim - 1) - g0 * l.tail(q.dim - 1)) / l(0);
    }
    for (size_t k = 0; k < r_.psd.size(); ++k) {
      const auto& b = r_.psd[k];
      const auto& l = W_.psd[k].lam;
      for (int c = 0; c < b.n; ++c)
        for (int rr = 0; rr <= c; ++rr)
          g(b.off + svec_index(rr, c)) =
              w(b.off + svec_index(rr, c)) / (0.5 * (l(rr) + l(c)));
    }
    return g;
  }

  // Largest step alpha with lam + alpha d staying in the cone.
  double max_step(const VecR& d) const {
    double amax = kInf;
    for (int i = 0; i < r_.lp_dim; ++i)
      if (d(i) < 0.0) amax = std::min(amax, -lam_(i) / d(i));
    for (const auto& q : r_.socs) {
      auto l = lam_.segment(q.off, q.dim);
      auto v = d.segment(q.off, q.dim);
      const double ra = v(0) * v(0) - v.tail(q.dim - 1).squaredNorm();
      const double rb = l(0) * v(0) - l.tail(q.dim - 1).dot(v.tail(q.dim - 1));
      const double rc = l(0) * l(0) - l.tail(q.dim - 1).squaredNorm();
      double a = kInf;
      if (std::abs(ra) < 1e-300) {
        if (rb < 0.0) a = -rc / (2.0 * rb);
      } else {
        const double disc = rb * rb - ra * rc;
        if (ra < 0.0)
          a = (-rb - std::sqrt(std::max(0.0, disc))) / ra;
        else if (rb < 0.0 && disc >= 0.0)
          a = (-rb - std::sqrt(disc)) / ra;
      }
      if (v(0) < 0.0) a = std::min(a, -l(0) / v(0));
      if (a >= 0.0) amax = std::min(amax, a);
    }
    MatR D;
    for (size_t k = 0; k < r_.psd.size(); ++k) {
      const auto& b = r_.psd[k];
      mat_of_svec(d.data() + b.off, b.n, D);
      VecR inv_sqrt = W_.psd[k].lam.cwiseSqrt().cwiseInverse();
      D = inv_sqrt.asDiagonal() * D * inv_sqrt.asDiagonal();
      Eigen::SelfAdjointEigenSolver<MatR> es(D, Eigen::EigenvaluesOnly);
      const double mn = es.eigenvalues().minCoeff();
      if (mn < 0.0) amax = std::min(amax, -1.0 / mn);
    }
    return amax;
  }

  // --- data products ---

  VecR G_mul(const VecR& x) const {
    VecR out = VecR::Zero(r_.cone_dim);
    for (int i = 0; i < r_.lp_dim; ++i) {
      double acc = 0.0;
      for (const auto& [q, v] : r_.lp[i].a) acc += v * x(q);
      out(i) = acc;
    }
    for (const auto& c : r_.socs)
      for (int k = 0; k < c.dim; ++k) {
        double acc = 0.0;
        for (const auto& [q, v] : c.rows[k].a) acc += v * x(q);
        out(c.off + k) = acc;
      }
    for (const auto& b : r_.psd) {
      std::vector<double> vg(b.protos.size(), 0.0);
      for (size_t t = 0; t < b.pid.size(); ++t)
        vg[b.grp[t]] += b.dp[t] * x(b.pid[t]);
      auto seg = out.segment(b.off, b.sd);
      for (size_t g = 0; g < b.protos.size(); ++g) {
        if (vg[g] == 0.0) continue;
        for (const auto& [k, v] : b.protos[g].sv) seg(k) -= vg[g] * v;
      }
    }
    return out;
  }

  VecR GT_mul(const VecR& u) const {
    VecR out = VecR::Zero(r_.m);
    for (int i = 0; i < r_.lp_dim; ++i)
      for (const auto& [q, v] : r_.lp[i].a) out(q) += v * u(i);
    for (const auto& c : r_.socs)
      for (int k = 0; k < c.dim; ++k)
        for (const auto& [q, v] : c.rows[k].a) out(q) += v * u(c.off + k);
    for (const auto& b : r_.psd) {
      std::vector<double> dg(b.protos.size(), 0.0);
      auto seg = u.segment(b.off, b.sd);
      for (size_t g = 0; g < b.protos.size(); ++g) {
        double acc = 0.0;
        for (const auto& [k, v] : b.protos[g].sv) acc += v * seg(k);
        dg[g] = acc;
      }
      for (size_t t = 0; t < b.pid.size(); ++t)
        out(b.pid[t]) -= b.dp[t] * dg[b.grp[t]];
    }
    return out;
  }

  void build_kkt() {
    const int m = r_.m, p = r_.n_eq;
    MatR H = MatR::Zero(m, m);
    for (int i = 0; i < r_.lp_dim; ++i) {
      const double iw2 = 1.0 / (W_.lp.w(i) * W_.lp.w(i));
      for (const auto& [qa, va] : r_.lp[i].a)
        for (const auto& [qb, vb] : r_.lp[i].a) H(qa, qb) += iw2 * va * vb;
    }
    for (size_t k = 0; k < r_.socs.size(); ++k) {
      const auto& c = r_.socs[k];
      const auto& w = W_.soc[k];
      const int na = int(c.cols.size());
      // gu = G^T u, gw = G^T wbar over active columns
      VecR gu = VecR::Zero(na), gw = VecR::Zero(na);
      for (int kk = 0; kk < c.dim; ++kk)
        for (const auto& [j, v] : c.rows_local[kk]) {
          gu(j) += v * w.u(kk);
          gw(j) += v * w.wbar(kk);
        }
      MatR Hq = c.ata;
      const double uu = w.u.squaredNorm();
      Hq.noalias() += 4.0 * uu * gu * gu.transpose();
      Hq.noalias() -= 2.0 * gu * gw.transpose();
      Hq.noalias() -= 2.0 * gw * gu.transpose();
      Hq /= w.eta * w.eta;
      for (int a = 0; a < na; ++a)
        for (int bq = 0; bq < na; ++bq) H(c.cols[a], c.cols[bq]) += Hq(a, bq);
    }
    MatR T1, D, Phat, Hred;
    for (size_t k = 0; k < r_.psd.size(); ++k) {
      const auto& b = r_.psd[k];
      const auto& w = W_.psd[k];
      const int ng = int(b.protos.size());
      Phat.resize(b.sd, ng);
      T1.setZero(b.n, b.n);
      std::vector<int> touched;
      for (int g = 0; g < ng; ++g) {
        touched.clear();
        T1.setZero();
        for (const auto& t : b.protos[g].mt) {
          T1.col(t.c) += t.v * w.Rinv.col(t.r);
          touched.push_back(t.c);
          if (t.r != t.c) {
            T1.col(t.r) += t.v * w.Rinv.col(t.c);
            touched.push_back(t.r);
          }
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        const int nj = int(touched.size());
        MatR Tj(b.n, nj), Rj(b.n, nj);
        for (int j = 0; j < nj; ++j) {
          Tj.col(j) = T1.col(touched[j]);
          Rj.col(j) = w.Rinv.col(touched[j]);
        }
        D.noalias() = Tj * Rj.transpose();
        D = 0.5 * (D + D.transpose()).eval();
        VecR col(b.sd);
        svec_of_dense(D, col.data());
        Phat.col(g) = col;
      }
      Hred.noalias() = Phat.transpose() * Phat;
      for (size_t ta = 0; ta < b.pid.size(); ++ta)
        for (size_t tb = 0; tb < b.pid.size(); ++tb)
          H(b.pid[ta], b.pid[tb]) += b.dp[ta] * b.dp[tb] * Hred(b.grp[ta], b.grp[tb]);
    }
    const double d1 = 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    K_.setZero(m + p, m + p);
    K_.topLeftCorner(m, m) = H + d1 * MatR::Identity(m, m);
    if (p > 0) {
      K_.topRightCorner(m, p) = r_.A.transpose();
      K_.bottomLeftCorner(p, m) = r_.A;
      K_.bottomRightCorner(p, p) = -1e-12 * MatR::Identity(p, p);
    }
    lu_.compute(K_);
  }

  Dirs solve3(const VecR& bx, const VecR& by, const VecR& bz) const {
    VecR v2 = bz;
    apply_scaling(v2, 4);  // (W^T W)^{-1} bz
    const int m = r_.m, p = r_.n_eq;
    VecR rhs(m + p);
    rhs.head(m) = bx + GT_mul(v2);
    if (p > 0) rhs.tail(p) = by;
    VecR sol = lu_.solve(rhs);
    for (int rr = 0; rr < 2; ++rr) {
      VecR res = rhs - K_ * sol;
      if (res.norm() <= 1e-13 * (1.0 + rhs.norm())) break;
      sol += lu_.solve(res);
    }
    Dirs d;
    d.x = sol.head(m);
    d.y = p > 0 ? VecR(sol.tail(p)) : VecR(0);
    d.z = G_mul(d.x) - bz;
    apply_scaling(d.z, 4);
    return d;
  }

  FeasibilityOutcome finish_feasible(const VecR& xs, const ResidualReport& rep,
                                     int iters, double mu, double pres) const {
    FeasibilityOutcome out;
    out.status = SolveStatus::feasible;
    if (tol_.want_assignment) out.x = xs;
    out.residuals = rep;
    out.margin = rep.worst();
    out.stats.iterations = iters;
    out.stats.mu = mu;
    out.stats.primal_resid = pres;
    out.stats.tau = tau_;
    out.stats.kappa = kap_;
    return out;
  }

  VecR unscaled_x() const {
    VecR xs = x_ / tau_;
    for (int q = 0; q < r_.m; ++q) xs(q) *= r_.dcol(q);
    return xs;
  }
};

FeasibilityOutcome Hsd::run() {
  const int m = r_.m, p = r_.n_eq;
  const double nb = 1.0 + r_.b.norm();
  const double nh = 1.0 + r_.hstack.norm();

  x_ = VecR::Zero(m);
  y_ = VecR::Zero(p);
  z_ = VecR::Zero(r_.cone_dim);
  s_ = VecR::Zero(r_.cone_dim);
  lam_ = VecR::Zero(r_.cone_dim);
  const VecR e = cone_e();

  // Initial point: W = I least-squares solves, then shift into the interior.
  s_ = e;
  z_ = e;
  if (!update_scaling()) return {};
  build_kkt();
  {
    Dirs dp = solve3(VecR::Zero(m), r_.b, r_.hstack);
    x_ = dp.x;
    if (p > 0) y_.setZero();
    VecR sh = -dp.z;  // h - G x
    const double me = min_eig(sh);
    s_ = sh;
    if (me <= 1e-8 * std::max(1.0, sh.cwiseAbs().maxCoeff())) s_ += (1.0 - me) * e;
    // dual side: the objective is zero, so the cone identity is the start
    z_ = e;
  }
  tau_ = 1.0;
  kap_ = 1.0;

  const double deg1 = r_.degree + 1.0;
  double mu0 = (s_.dot(z_) + tau_ * kap_) / deg1;
  double mu = mu0;
  double mu_prev = mu0;
  int stall = 0;

  FeasibilityOutcome fail;
  fail.status = SolveStatus::solver_failure;
  double best_cres = 1e300;  // sharpest Farkas vector seen along the run
  double best_nu = 0.0;

  for (int it = 0; it < tol_.max_iters; ++it) {
    if (!update_scaling()) {
      fail.stats.iterations = it;
      break;  // the tail can still classify from a retained certificate
    }
    mu = (lam_.squaredNorm() + tau_ * kap_) / deg1;

    // Residuals of the homogeneous system.
    VecR Rx = GT_mul(z_);
    if (p > 0) Rx += r_.A.transpose() * y_;
    VecR Ry = p > 0 ? VecR(r_.A * x_ - tau_ * r_.b) : VecR(0);
    VecR Rz = G_mul(x_) + s_ - tau_ * r_.hstack;
    const double Rtau = kap_ + (p > 0 ? r_.b.dot(y_) : 0.0) + r_.hstack.dot(z_);

    const double pres =
        std::max(p > 0 ? Ry.norm() / nb : 0.0, Rz.norm() / nh) / tau_;

    // Feasible exit: candidate must pass the independent dense re-check.
    if (pres <= 1e-6 && tau_ > 1e-10 * std::max(1.0, kap_)) {
      VecR xs = unscaled_x();
      ResidualReport rep = check_assignment(prob_, xs);
      if (rep.worst() >= -tol_.verify) return finish_feasible(xs, rep, it, mu, pres);
    }

    // Farkas certificate: h'z + b'y < 0 with G'z + A'y ~ 0 and z in the cone.
    const double nu = -(r_.hstack.dot(z_) + (p > 0 ? r_.b.dot(y_) : 0.0));
    if (trace_)
      std::fprintf(stderr,
                   "  hsd it=%3d mu=%9.3e pres=%9.3e tau=%9.3e kap=%9.3e "
                   "nu=%9.3e cres=%9.3e\n",
                   it, mu, pres, tau_, kap_, nu,
                   nu > 0.0 ? Rx.norm() / nu / r_.gscale : -1.0);
    // A strong certificate ends the run on its own; once tau has collapsed
    // against kappa the iteration can only replay the same ray, so a weaker
    // residual is accepted there: quality q still excludes every assignment
    // of scaled norm below 1/q, far beyond any design the power budget
    // admits.
    const bool ray_collapse = tau_ <= 1e-14 * std::max(1.0, kap_);
    if (nu > 0.0) {
      const double cres = Rx.norm() / nu / r_.gscale;
      if (cres < best_cres) {
        best_cres = cres;
        best_nu = nu;
      }
      if (cres <= 10.0 * tol_.feas || (ray_collapse && cres <= 1e-4)) {
        FeasibilityOutcome out;
        out.status = SolveStatus::infeasible;
        out.cert_objective = nu;
        out.stats.iterations = it;
        out.stats.mu = mu;
        out.stats.cert_resid = cres;
        out.stats.primal_resid = pres;
        out.stats.tau = tau_;
        out.stats.kappa = kap_;
        return out;
      }
    }
    if (ray_collapse) break;

    // Stall safeguard.
    if (mu >= mu_prev * (1.0 - 1e-5) && pres > 1e-6) {
      if (++stall >= 15) break;
    } else {
      stall = 0;
    }
    mu_prev = mu;

    build_kkt();
    const Dirs p1 = solve3(VecR::Zero(m), r_.b, r_.hstack);
    const double denom =
        (p > 0 ? r_.b.dot(p1.y) : 0.0) + r_.hstack.dot(p1.z) - kap_ / tau_;
    if (!(std::abs(denom) > 1e-300)) break;

    auto make_step = [&](double sigma, const VecR& gs, double dtau_rhs) {
      VecR bz = -(1.0 - sigma) * Rz;
      VecR wgs = gs;
      apply_scaling(wgs, 1);  // W^T gs
      bz -= wgs;
      const Dirs p2 = solve3(-(1.0 - sigma) * Rx, -(1.0 - sigma) * Ry, bz);
      const double num = -(1.0 - sigma) * Rtau - dtau_rhs / tau_ -
                         ((p > 0 ? r_.b.dot(p2.y) : 0.0) + r_.hstack.dot(p2.z));
      const double dtau = num / denom;
      struct Full {
        VecR dx, dy, dz, dz_sc, ds_sc;
        double dtau, dkap;
      } f;
      f.dx = p2.x + dtau * p1.x;
      f.dy = p > 0 ? VecR(p2.y + dtau * p1.y) : VecR(0);
      f.dz = p2.z + dtau * p1.z;
      f.dz_sc = f.dz;
      apply_scaling(f.dz_sc, 0);  // W dz
      f.ds_sc = gs - f.dz_sc;
      f.dtau = dtau;
      f.dkap = (dtau_rhs - kap_ * dtau) / tau_;
      return f;
    };

    // Affine direction: gs = -lambda, so W^T gs = -s.
    auto aff = make_step(0.0, VecR(-lam_), -tau_ * kap_);
    double alpha_a = std::min({max_step(aff.ds_sc), max_step(aff.dz_sc),
                               aff.dtau < 0.0 ? -tau_ / aff.dtau : kInf,
                               aff.dkap < 0.0 ? -kap_ / aff.dkap : kInf, 1.0});
    alpha_a = std::max(alpha_a, 0.0);
    const double mu_aff = ((lam_ + alpha_a * aff.ds_sc).dot(lam_ + alpha_a * aff.dz_sc) +
                           (tau_ + alpha_a * aff.dtau) * (kap_ + alpha_a * aff.dkap)) /
                          deg1;
    double sigma = std::clamp(mu_aff / mu, 0.0, 1.0);
    sigma = sigma * sigma * sigma;

    // Combined direction with Mehrotra correction.
    VecR ds = sigma * mu * e - jordan_mul(lam_, lam_) - jordan_mul(aff.ds_sc, aff.dz_sc);
    const double dtau_rhs = sigma * mu - tau_ * kap_ - aff.dtau * aff.dkap;
    VecR gs = jordan_solve_lam(ds);
    auto cmb = make_step(sigma, gs, dtau_rhs);

    double amax = std::min({max_step(cmb.ds_sc), max_step(cmb.dz_sc),
                            cmb.dtau < 0.0 ? -tau_ / cmb.dtau : kInf,
                            cmb.dkap < 0.0 ? -kap_ / cmb.dkap : kInf});
    double alpha = std::min(1.0, 0.99 * amax);
    // The scaling is inverse on the two sides, so after a step of a the
    // block products of s and z are those of (lam + a ds_sc, lam + a dz_sc)
    // exactly. Keep every Jordan eigenvalue of those products and the
    // tau-kappa pair inside a wide neighborhood of the path: one pair
    // collapsing far below the mean (even inside an otherwise healthy
    // block) sends the next scaling singular and the unscaled step into
    // overflow.
    {
      MatR A, B;
      auto min_ratio = [&](double a) {
        const VecR sa = lam_ + a * cmb.ds_sc;
        const VecR za = lam_ + a * cmb.dz_sc;
        const double tk = (tau_ + a * cmb.dtau) * (kap_ + a * cmb.dkap);
        const double mu_a = (sa.dot(za) + tk) / deg1;
        if (!(mu_a > 0.0)) return -1.0;
        double worst = tk;
        for (int i = 0; i < r_.lp_dim; ++i)
          worst = std::min(worst, sa(i) * za(i));
        for (const auto& cone : r_.socs) {
          auto u = sa.segment(cone.off, cone.dim);
          auto v = za.segment(cone.off, cone.dim);
          VecR w1 = u(0) * v.tail(cone.dim - 1) + v(0) * u.tail(cone.dim - 1);
          worst = std::min(worst, u.dot(v) - w1.norm());
        }
        for (const auto& b : r_.psd) {
          mat_of_svec(sa.data() + b.off, b.n, A);
          mat_of_svec(za.data() + b.off, b.n, B);
          MatR P = A * B;
          P = 0.5 * (P + P.transpose()).eval();
          Eigen::SelfAdjointEigenSolver<MatR> es(P, Eigen::EigenvaluesOnly);
          if (es.info() != Eigen::Success) return -1.0;
          worst = std::min(worst, es.eigenvalues().minCoeff());
        }
        return worst / mu_a;
      };
      const double gamma = std::min(1e-3, 0.9 * min_ratio(0.0));
      for (int bt = 0; bt < 60 && min_ratio(alpha) < gamma; ++bt)
        alpha *= 0.8;
    }
    if (!(alpha > 1e-10)) break;

    VecR ds_un = cmb.ds_sc;
    apply_scaling(ds_un, 1);  // s step back to unscaled coordinates: W^T ds_sc
    x_ += alpha * cmb.dx;
    if (p > 0) y_ += alpha * cmb.dy;
    z_ += alpha * cmb.dz;
    s_ += alpha * ds_un;
    repair_interior(s_);
    repair_interior(z_);
    tau_ += alpha * cmb.dtau;
    kap_ += alpha * cmb.dkap;
    if (!(tau_ > 0.0) || !(kap_ > 0.0)) break;

    fail.stats.iterations = it + 1;
  }

  // Last-chance verification of the current candidate.
  if (tau_ > 1e-10 * std::max(1.0, kap_)) {
    VecR xs = unscaled_x();
    ResidualReport rep = check_assignment(prob_, xs);
    if (rep.worst() >= -tol_.verify)
      return finish_feasible(xs, rep, fail.stats.iterations, mu, 0.0);
  }
  // The run exhausted itself (step collapse, stall, or the iteration cap)
  // without a conclusive state. A retained Farkas vector of the quality the
  // collapsed-ray branch already accepts still settles the question.
  if (best_nu > 0.0 && best_cres <= 1e-4) {
    FeasibilityOutcome out;
    out.status = SolveStatus::infeasible;
    out.cert_objective = best_nu;
    out.stats.iterations = fail.stats.iterations;
    out.stats.mu = mu;
    out.stats.cert_resid = best_cres;
    out.stats.tau = tau_;
    out.stats.kappa = kap_;
    return out;
  }
  fail.stats.mu = mu;
  fail.stats.tau = tau_;
  fail.stats.kappa = kap_;
  return fail;
}

}  // namespace

FeasibilityOutcome check_feasibility(const FeasibilityProblem& p,
                                     const SolveTolerances& tol) {
  // Degenerate shapes first: nothing to decide, or pure least squares.
  Realized r = realize(p);
  if (r.m == 0 || (r.cone_dim == 0 && r.n_eq == 0)) {
    VecR x0 = VecR::Zero(r.m);
    ResidualReport rep = check_assignment(p, x0);
    FeasibilityOutcome out;
    out.residuals = rep;
    out.margin = rep.worst();
    out.status = rep.worst() >= -tol.verify ? SolveStatus::feasible
                                            : SolveStatus::infeasible;
    if (out.status == SolveStatus::feasible && tol.want_assignment) out.x = x0;
    return out;
  }
  if (r.cone_dim == 0) {
    VecR xr = r.A.colPivHouseholderQr().solve(r.b);
    for (int q = 0; q < r.m; ++q) xr(q) *= r.dcol(q);
    ResidualReport rep = check_assignment(p, xr);
    FeasibilityOutcome out;
    out.residuals = rep;
    out.margin = rep.worst();
    out.status = rep.worst() >= -tol.verify ? SolveStatus::feasible
                                            : SolveStatus::infeasible;
    if (out.status == SolveStatus::feasible && tol.want_assignment) out.x = xr;
    return out;
  }
  Hsd solver(p, r, tol);
  return solver.run();
}

}  // namespace isac::conic
