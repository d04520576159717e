// Copyright 2026 The qfv authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qfv/waylab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace qfv {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_integer_spectrum(const Operator& L, const char* what,
                              const TolerancePolicy& pol) {
  EigenSystem es = hermitian_eigendecomposition(L, pol);
  for (double v : es.values) {
    if (std::abs(v - std::round(v)) > pol.eq_tol)
      throw ValidationError(std::string(what) +
                            " eigenvalue not integral: " + std::to_string(v));
  }
}

double offdiag_max(const Operator& A) {
  double m = 0;
  for (int i = 0; i < A.dim(); ++i)
    for (int j = 0; j < A.dim(); ++j)
      if (i != j) m = std::max(m, std::abs(A.at(i, j)));
  return m;
}

// Inner product of the charge-lambda slices of two apparatus vectors.
cplx block_inner(const FiduciaryApparatus& app, const StateVector& u,
                 const StateVector& v, int lambda) {
  if (!app.in_lambda_range(lambda)) return cplx(0, 0);
  int off = app.block_offset(lambda);
  cplx s(0, 0);
  for (int j = 0; j < app.block_dim(); ++j)
    s += std::conj(u.amps[off + j]) * v.amps[off + j];
  return s;
}

// <phi_a, P1(charge) phi_b> from the measured-basis columns.
cplx charge_weight(const FiduciaryApparatus& app, int charge, int a, int b) {
  cplx s(0, 0);
  for (int i = 0; i < app.dim_h1; ++i)
    if (app.charge_of_site[i] == charge)
      s += std::conj(app.phi.at(i, a)) * app.phi.at(i, b);
  return s;
}

}  // namespace

ConservedPair::ConservedPair(Operator m, Operator l1, Operator l2,
                             const TolerancePolicy& pol)
    : M(std::move(m)), L1(std::move(l1)), L2(std::move(l2)), l(0) {
  if (M.dim() != L1.dim())
    throw DimensionMismatch("measured observable and system charge disagree");
  if (!M.is_hermitian(pol.eq_tol)) throw NotHermitian("measured observable");
  if (!L1.is_hermitian(pol.eq_tol)) throw NotHermitian("system charge");
  if (!L2.is_hermitian(pol.eq_tol)) throw NotHermitian("apparatus charge");
  require_integer_spectrum(L1, "system charge", pol);
  require_integer_spectrum(L2, "apparatus charge", pol);
  EigenSystem es = hermitian_eigendecomposition(L1, pol);
  for (double v : es.values)
    l = std::max(l, static_cast<int>(std::abs(std::round(v))));
}

YanaseResult yanase_condition(const Operator& M, const Operator& L1,
                              const TolerancePolicy& pol) {
  if (M.dim() != L1.dim()) throw DimensionMismatch("yanase_condition");
  if (!M.is_hermitian(pol.eq_tol)) throw NotHermitian("measured observable");
  if (!L1.is_hermitian(pol.eq_tol)) throw NotHermitian("conserved charge");
  double cmax = max_commutator(M, L1);
  bool ok = cmax <= pol.eq_tol;
  return {ok, cmax,
          ok ? "commutes: exact conservation-respecting repeatable "
               "measurement is not obstructed"
             : "does not commute: no exact conservation-respecting "
               "repeatable measurement exists"};
}

const StateVector& FiduciaryApparatus::pointer_state(int mu, int k) const {
  if (k != 0 || mu < 0 || mu >= static_cast<int>(X.size()))
    throw ValidationError("pointer index out of range");
  return X[mu];
}

const StateVector& FiduciaryApparatus::noise_state(int mu, int k) const {
  if (k != 0 || mu < 0 || mu >= static_cast<int>(eta.size()))
    throw ValidationError("noise index out of range");
  return eta[mu];
}

Operator FiduciaryApparatus::system_charge() const {
  Operator L1 = Operator::zero(dim_h1);
  for (int i = 0; i < dim_h1; ++i) L1.at(i, i) = charge_of_site[i];
  return L1;
}

Operator FiduciaryApparatus::apparatus_charge() const {
  Operator L2 = Operator::zero(h2_dim());
  for (int lam = -lambda_span(); lam <= lambda_span(); ++lam) {
    int off = block_offset(lam);
    for (int j = 0; j < block_dim(); ++j) L2.at(off + j, off + j) = lam;
  }
  return L2;
}

Operator FiduciaryApparatus::total_charge() const {
  return tensor_product(system_charge(), Operator::identity(h2_dim())) +
         tensor_product(Operator::identity(dim_h1), apparatus_charge());
}

StateVector FiduciaryApparatus::measured_basis_vector(int mu) const {
  StateVector v(dim_h1);
  for (int i = 0; i < dim_h1; ++i) v.amps[i] = phi.at(i, mu);
  return v;
}

Operator FiduciaryApparatus::measured_observable() const {
  Operator M = Operator::zero(dim_h1);
  for (int mu = 0; mu < dim_h1; ++mu) {
    StateVector v = measured_basis_vector(mu);
    M = M + Operator::outer(v, v) * cplx(mu, 0);
  }
  return M;
}

FiduciaryApparatus build_fiduciary(int l, double epsilon,
                                   const std::map<int, int>& dims_per_charge,
                                   const TolerancePolicy& pol) {
  if (l < 1) throw ValidationError("charge bound must be at least 1");
  if (!(epsilon > 0 && epsilon < 1))
    throw ValidationError("target inaccuracy must lie in (0, 1)");
  int max_charge = 0;
  for (const auto& [c, d] : dims_per_charge) {
    if (d < 1) throw ValidationError("eigenspace dimension must be positive");
    if (std::abs(c) > l)
      throw ValidationError("charge outside the declared bound");
    max_charge = std::max(max_charge, std::abs(c));
  }
  if (max_charge != l)
    throw ValidationError("declared charge bound not attained by spectrum");
  if (!dims_per_charge.count(0))
    throw ValidationError("charge-0 eigenspace required for the residue state");

  FiduciaryApparatus app;
  app.l = l;
  app.epsilon = epsilon;
  for (const auto& [c, d] : dims_per_charge)
    for (int k = 0; k < d; ++k) app.charge_of_site.push_back(c);
  app.dim_h1 = static_cast<int>(app.charge_of_site.size());
  const int D = app.dim_h1;

  double threshold = 2.0 * l / epsilon - 0.5;
  int N = static_cast<int>(std::floor(threshold)) + 1;
  while (N <= threshold) ++N;
  app.N = N;
  const double w = 1.0 / (2 * N + 1);  // per-block weight

  // measured basis: discrete Fourier transform of the charge basis, the
  // generic maximally noncommuting choice
  app.phi = Operator::zero(D);
  for (int i = 0; i < D; ++i)
    for (int a = 0; a < D; ++a)
      app.phi.at(i, a) = std::polar(1.0 / std::sqrt(double(D)),
                                    2.0 * kPi * i * a / D);

  for (int i = 0; i < D; ++i)
    if (app.charge_of_site[i] == 0) {
      app.psi = StateVector::basis(D, i);
      break;
    }

  for (int lam = -(N + l); lam <= N + l; ++lam)
    app.h2_block_dims[lam] = 2 * D;
  const int H2 = app.h2_dim();

  app.xi = StateVector(H2);
  for (int lam = -N; lam <= N; ++lam)
    app.xi.amps[app.block_offset(lam)] = std::sqrt(w);

  app.X.assign(D, StateVector(H2));
  for (int lam = -(N - 2 * l); lam <= N - 2 * l; ++lam)
    for (int a = 0; a < D; ++a)
      app.X[a].amps[app.block_offset(lam) + a] = std::sqrt(w);

  app.eta.assign(D, StateVector(H2));
  for (int lam = -(N + l); lam <= N + l; ++lam) {
    int abs_lam = std::abs(lam);
    if (abs_lam <= N - 3 * l) continue;
    Operator G = Operator::zero(D);
    if (abs_lam > N - l) {
      // both the preparation and pointer components are truncated here;
      // cross terms between measured indices survive
      for (int c = -l; c <= l; ++c) {
        if (std::abs(lam - c) > N) continue;
        for (int a = 0; a < D; ++a)
          for (int b = 0; b < D; ++b)
            G.at(a, b) += charge_weight(app, c, a, b) * w;
      }
    } else {
      // only the pointer component is truncated; diagonal by construction
      for (int c = -l; c <= l; ++c) {
        if (std::abs(lam - c) <= N - 2 * l) continue;
        for (int a = 0; a < D; ++a)
          G.at(a, a) += charge_weight(app, c, a, a) * w;
      }
    }
    EigenSystem es = hermitian_eigendecomposition(G, pol);
    double vmax = 0;
    for (double v : es.values) vmax = std::max(vmax, v);
    int rank = 0;
    std::vector<double> root(D, 0);
    for (int i = 0; i < D; ++i) {
      double v = es.values[i];
      if (v < -pol.eq_tol)
        throw GramNotPSD("noise Gram eigenvalue " + std::to_string(v) +
                         " at charge " + std::to_string(lam));
      // clip below the rank threshold so the factor has exact rank
      if (v > pol.rank_tol_factor * vmax) {
        root[i] = std::sqrt(v);
        ++rank;
      }
    }
    if (rank > app.block_dim() - D)
      throw InsufficientMultiplicity("charge block too small for noise rank");
    // eta components: columns of G^{1/2} laid into the block's upper half
    int off = app.block_offset(lam) + D;
    for (int b = 0; b < D; ++b)
      for (int j = 0; j < D; ++j) {
        cplx s(0, 0);
        for (int i = 0; i < D; ++i)
          s += es.vectors[i].amps[j] * root[i] * std::conj(es.vectors[i].amps[b]);
        app.eta[b].amps[off + j] = s;
      }
  }
  return app;
}

CheckReport verify_fiduciary(const FiduciaryApparatus& app,
                             const TolerancePolicy& pol) {
  CheckReport rep;
  const int D = app.dim_h1;
  const int l = app.l;
  const int N = app.N;
  const double tol = 10 * pol.eq_tol;
  const double noise_target = 4.0 * l / (2 * N + 1);

  double r_xx = 0;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b)
      if (a != b) r_xx = std::max(r_xx, std::abs(inner(app.X[a], app.X[b])));
  rep.add("pointer_orthogonality", r_xx <= tol, r_xx, 0, tol);

  double r_xe = 0;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b)
      r_xe = std::max(r_xe, std::abs(inner(app.X[a], app.eta[b])));
  rep.add("pointer_noise_orthogonality", r_xe <= tol, r_xe, 0, tol);

  double r_ee = 0;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b)
      if (a != b) r_ee = std::max(r_ee, std::abs(inner(app.eta[a], app.eta[b])));
  rep.add("noise_orthogonality", r_ee <= tol, r_ee, 0, tol);

  double r_norm = 0;
  double psi_sq = app.psi.norm() * app.psi.norm();
  double worst_norm = 0;
  for (int a = 0; a < D; ++a) {
    double n2 = psi_sq * app.eta[a].norm() * app.eta[a].norm();
    if (std::abs(n2 - noise_target) > r_norm) {
      r_norm = std::abs(n2 - noise_target);
      worst_norm = n2;
    }
  }
  rep.add("noise_norm", r_norm <= tol, worst_norm, noise_target, tol);

  // per-charge-block Gram identity: what the preparation loses to
  // truncation must reappear as the noise Gram, block by block
  double r_id = 0;
  for (int lam = -(N + l + 2); lam <= N + l + 2; ++lam) {
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        cplx lhs(0, 0);
        for (int c = -l; c <= l; ++c) {
          cplx xi_sq = block_inner(app, app.xi, app.xi, lam - c);
          cplx xx = block_inner(app, app.X[a], app.X[b], lam - c);
          lhs += charge_weight(app, c, a, b) * (xi_sq - xx);
        }
        cplx rhs = app.in_lambda_range(lam)
                       ? block_inner(app, app.eta[a], app.eta[b], lam)
                       : cplx(0, 0);
        r_id = std::max(r_id, std::abs(lhs - rhs));
      }
  }
  rep.add("charge_block_gram_identity", r_id <= tol, r_id, 0, tol);
  return rep;
}

std::vector<StateVector> initial_vectors(const FiduciaryApparatus& app) {
  std::vector<StateVector> out;
  for (int mu = 0; mu < app.dim_h1; ++mu)
    out.push_back(tensor_product(app.measured_basis_vector(mu), app.xi));
  return out;
}

std::vector<StateVector> final_vectors(const FiduciaryApparatus& app) {
  std::vector<StateVector> out;
  for (int mu = 0; mu < app.dim_h1; ++mu)
    out.push_back(tensor_product(app.measured_basis_vector(mu), app.X[mu]) +
                  tensor_product(app.psi, app.eta[mu]));
  return out;
}

namespace {

struct EigenGrouping {
  bool diagonal;                       // standard-basis eigenvectors
  std::vector<double> values;          // one representative per group
  std::vector<std::vector<int>> cols;  // member indices / column indices
  EigenSystem es;                      // populated when !diagonal
};

EigenGrouping group_eigenspaces(const Operator& L, const TolerancePolicy& pol) {
  EigenGrouping g;
  const int n = L.dim();
  double scale = std::max(1.0, L.max_abs());
  double gap = 1e-6 * scale;
  std::vector<double> vals(n);
  std::vector<int> order(n);
  g.diagonal = offdiag_max(L) <= 1e-13 * scale;
  if (g.diagonal) {
    for (int i = 0; i < n; ++i) vals[i] = L.at(i, i).real();
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return vals[a] < vals[b]; });
  } else {
    if (!L.is_hermitian(pol.eq_tol)) throw NotHermitian("conserved charge");
    g.es = hermitian_eigendecomposition(L, pol);
    vals = g.es.values;
    std::iota(order.begin(), order.end(), 0);
  }
  for (int i = 0; i < n; ++i) {
    if (i == 0 || vals[order[i]] - vals[order[i - 1]] > gap) {
      g.cols.emplace_back();
      g.values.push_back(vals[order[i]]);
    }
    g.cols.back().push_back(order[i]);
  }
  return g;
}

// d-dim coordinates of v inside one eigenspace
std::vector<cplx> project_coords(const EigenGrouping& g, int group,
                                 const StateVector& v) {
  const auto& cols = g.cols[group];
  std::vector<cplx> out(cols.size());
  for (size_t j = 0; j < cols.size(); ++j) {
    if (g.diagonal) {
      out[j] = v.amps[cols[j]];
    } else {
      const StateVector& e = g.es.vectors[cols[j]];
      cplx s(0, 0);
      for (int i = 0; i < v.dim; ++i) s += std::conj(e.amps[i]) * v.amps[i];
      out[j] = s;
    }
  }
  return out;
}

cplx dotc(const std::vector<cplx>& u, const std::vector<cplx>& v) {
  cplx s(0, 0);
  for (size_t i = 0; i < u.size(); ++i) s += std::conj(u[i]) * v[i];
  return s;
}

double vnorm(const std::vector<cplx>& u) {
  return std::sqrt(std::abs(dotc(u, u)));
}

// Orthonormalizes vecs (in order, dependents dropped), then completes with
// standard basis vectors in index order.
std::vector<std::vector<cplx>> orthonormal_completion(
    std::vector<std::vector<cplx>> vecs, int d) {
  std::vector<std::vector<cplx>> basis;
  auto feed = [&](std::vector<cplx> v, double keep) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) {
        cplx c = dotc(b, v);
        for (int i = 0; i < d; ++i) v[i] -= c * b[i];
      }
    double nv = vnorm(v);
    if (nv > keep) {
      for (int i = 0; i < d; ++i) v[i] /= nv;
      basis.push_back(std::move(v));
    }
  };
  for (auto& v : vecs) feed(std::move(v), 1e-7);
  for (int j = 0; j < d && static_cast<int>(basis.size()) < d; ++j) {
    std::vector<cplx> e(d, cplx(0, 0));
    e[j] = 1;
    feed(std::move(e), 1e-6);
  }
  if (static_cast<int>(basis.size()) != d)
    throw ConvergenceFailure("orthonormal completion fell short");
  return basis;
}

}  // namespace

Operator extend_conserving_unitary(const std::vector<StateVector>& psi_in,
                                   const std::vector<StateVector>& psi_out,
                                   const Operator& L,
                                   const TolerancePolicy& pol) {
  if (psi_in.size() != psi_out.size())
    throw DimensionMismatch("vector family sizes disagree");
  const int n = L.dim();
  const int m = static_cast<int>(psi_in.size());
  for (const auto& v : psi_in)
    if (v.dim != n) throw DimensionMismatch("input vector dimension");
  for (const auto& v : psi_out)
    if (v.dim != n) throw DimensionMismatch("output vector dimension");

  EigenGrouping g = group_eigenspaces(L, pol);
  const int ngroups = static_cast<int>(g.cols.size());

  // per-eigenspace coordinates of both families
  std::vector<std::vector<std::vector<cplx>>> ain(ngroups), aout(ngroups);
  for (int gi = 0; gi < ngroups; ++gi) {
    for (int a = 0; a < m; ++a) {
      ain[gi].push_back(project_coords(g, gi, psi_in[a]));
      aout[gi].push_back(project_coords(g, gi, psi_out[a]));
    }
  }

  // the extension exists iff every eigenspace sees identical Grams
  double worst = 0;
  double worst_lam = 0;
  int worst_a = 0, worst_b = 0;
  for (int gi = 0; gi < ngroups; ++gi)
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        double diff =
            std::abs(dotc(ain[gi][a], ain[gi][b]) - dotc(aout[gi][a], aout[gi][b]));
        if (diff > worst) {
          worst = diff;
          worst_lam = g.values[gi];
          worst_a = a;
          worst_b = b;
        }
      }
  if (worst > pol.eq_tol) {
    std::ostringstream msg;
    msg << "eigenspace Gram mismatch " << worst << " at charge " << worst_lam
        << ", pair (" << worst_a << ", " << worst_b << ")";
    throw GramMismatch(msg.str());
  }

  Operator U = Operator::zero(n);
  for (int gi = 0; gi < ngroups; ++gi) {
    const auto& cols = g.cols[gi];
    const int d = static_cast<int>(cols.size());
    auto us = orthonormal_completion(ain[gi], d);
    auto vs = orthonormal_completion(aout[gi], d);
    // block map sends the i-th basis vector of one side to the i-th of the
    // other; the leading vectors realize psi_in -> psi_out
    std::vector<cplx> M(static_cast<size_t>(d) * d, cplx(0, 0));
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          M[static_cast<size_t>(i) * d + j] += vs[k][i] * std::conj(us[k][j]);
    if (g.diagonal) {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          U.at(cols[i], cols[j]) = M[static_cast<size_t>(i) * d + j];
    } else {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          cplx mij = M[static_cast<size_t>(i) * d + j];
          const StateVector& bi = g.es.vectors[cols[i]];
          const StateVector& bj = g.es.vectors[cols[j]];
          for (int p = 0; p < n; ++p) {
            if (std::abs(bi.amps[p]) == 0.0) continue;
            cplx left = bi.amps[p] * mij;
            for (int q = 0; q < n; ++q)
              U.at(p, q) += left * std::conj(bj.amps[q]);
          }
        }
    }
  }
  return U;
}

double max_commutator(const Operator& A, const Operator& B) {
  if (A.dim() != B.dim()) throw DimensionMismatch("max_commutator");
  const int n = A.dim();
  double scale_b = std::max(1.0, B.max_abs());
  if (offdiag_max(B) <= 1e-13 * scale_b) {
    double m = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m = std::max(m, std::abs(A.at(i, j) * (B.at(j, j) - B.at(i, i))));
    return m;
  }
  double scale_a = std::max(1.0, A.max_abs());
  if (offdiag_max(A) <= 1e-13 * scale_a) {
    double m = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m = std::max(m, std::abs(B.at(i, j) * (A.at(i, i) - A.at(j, j))));
    return m;
  }
  return max_abs_diff(A * B, B * A);
}

Operator random_conserving_unitary(Rng& rng,
                                   const std::vector<int>& charge_per_index) {
  const int n = static_cast<int>(charge_per_index.size());
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[charge_per_index[i]].push_back(i);
  Operator U = Operator::zero(n);
  for (const auto& [c, idx] : groups) {
    (void)c;
    Operator R = rng.random_unitary(static_cast<int>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t j = 0; j < idx.size(); ++j)
        U.at(idx[i], idx[j]) = R.at(static_cast<int>(i), static_cast<int>(j));
  }
  return U;
}

OzawaResult ozawa_noise_bound(const Operator& U, const Operator& M,
                              const Operator& A_probe, const Operator& L1,
                              const Operator& L2, const StateVector& psi,
                              const StateVector& xi,
                              const TolerancePolicy& pol) {
  const int n1 = L1.dim();
  const int n2 = L2.dim();
  const int n = n1 * n2;
  if (U.dim() != n || M.dim() != n1 || A_probe.dim() != n2 || psi.dim != n1 ||
      xi.dim != n2)
    throw DimensionMismatch("ozawa_noise_bound");
  if (!M.is_hermitian(pol.eq_tol)) throw NotHermitian("measured observable");
  if (!A_probe.is_hermitian(pol.eq_tol)) throw NotHermitian("probe meter");
  if (std::abs(psi.norm() - 1) > pol.eq_tol ||
      std::abs(xi.norm() - 1) > pol.eq_tol)
    throw ValidationError("input states must be normalized");

  Operator I1 = Operator::identity(n1);
  Operator I2 = Operator::identity(n2);
  Operator L = tensor_product(L1, I2) + tensor_product(I1, L2);
  double cons = max_commutator(U, L);
  if (cons > 10 * pol.eq_tol)
    throw ConservationViolated("coupling moves charge: commutator " +
                               std::to_string(cons));

  Operator MI = tensor_product(M, I2);
  Operator IA = tensor_product(I1, A_probe);
  Operator Ud = U.adjoint();
  auto noise_apply = [&](const StateVector& v) {
    return Ud.apply(MI.apply(U.apply(v))) - IA.apply(v);
  };

  StateVector Psi = tensor_product(psi, xi);
  StateVector nv = noise_apply(Psi);
  double noise_sq = std::max(0.0, inner(nv, nv).real());

  StateVector LPsi = L.apply(Psi);
  cplx comm_exp = inner(Psi, noise_apply(LPsi)) - inner(LPsi, nv);
  double numerator = std::norm(comm_exp);

  auto variance = [&](const Operator& A) {
    StateVector Av = A.apply(Psi);
    double e1 = inner(Psi, Av).real();
    double e2 = inner(Av, Av).real();
    return std::max(0.0, e2 - e1 * e1);
  };
  double denom = 4 * (variance(tensor_product(L1, I2)) +
                      variance(tensor_product(I1, L2)));
  if (denom < pol.eq_tol) {
    if (numerator < pol.eq_tol) return {noise_sq, 0.0, true};
    throw ZeroVariance("zero charge variance with nonzero commutator mean");
  }
  return {noise_sq, numerator / denom, false};
}

Operator default_pointer_observable(const FiduciaryApparatus& app) {
  Operator A = Operator::zero(app.h2_dim());
  for (int mu = 0; mu < app.dim_h1; ++mu) {
    double nrm = app.X[mu].norm();
    if (nrm < 1e-12) continue;
    StateVector unit = app.X[mu] * cplx(1.0 / nrm, 0);
    A = A + Operator::outer(unit, unit) * cplx(mu, 0);
  }
  return A;
}

void save_apparatus(const FiduciaryApparatus& app, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open manifest for writing: " + path);
  out.precision(17);
  out << "# fiduciary apparatus manifest\n";
  out << "l " << app.l << "\n";
  out << "epsilon " << app.epsilon << "\n";
  out << "N " << app.N << "\n";
  out << "dim_h1 " << app.dim_h1 << "\n";
  out << "charges";
  for (int c : app.charge_of_site) out << " " << c;
  out << "\n";
  auto emit_vec = [&](const std::string& name, const StateVector& v) {
    out << "vector " << name << " " << v.dim << "\n";
    for (int i = 0; i < v.dim; ++i)
      out << v.amps[i].real() << " " << v.amps[i].imag() << "\n";
  };
  out << "matrix phi " << app.dim_h1 << "\n";
  for (int i = 0; i < app.dim_h1; ++i) {
    for (int j = 0; j < app.dim_h1; ++j)
      out << (j ? " " : "") << app.phi.at(i, j).real() << " "
          << app.phi.at(i, j).imag();
    out << "\n";
  }
  emit_vec("psi", app.psi);
  emit_vec("xi", app.xi);
  for (int mu = 0; mu < app.dim_h1; ++mu)
    emit_vec("X" + std::to_string(mu), app.X[mu]);
  for (int mu = 0; mu < app.dim_h1; ++mu)
    emit_vec("eta" + std::to_string(mu), app.eta[mu]);
}

FiduciaryApparatus load_apparatus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest: " + path);
  FiduciaryApparatus app;
  bool have_l = false, have_eps = false, have_n = false, have_dim = false;
  std::string line;
  auto next_data_line = [&](std::string& dst) {
    while (std::getline(in, dst)) {
      size_t pos = dst.find('#');
      if (pos != std::string::npos) dst.erase(pos);
      if (dst.find_first_not_of(" \t\r\n") != std::string::npos) return true;
    }
    return false;
  };
  while (next_data_line(line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "l") {
      ls >> app.l;
      have_l = true;
    } else if (key == "epsilon") {
      ls >> app.epsilon;
      have_eps = true;
    } else if (key == "N") {
      ls >> app.N;
      have_n = true;
    } else if (key == "dim_h1") {
      ls >> app.dim_h1;
      have_dim = true;
    } else if (key == "charges") {
      int c;
      while (ls >> c) app.charge_of_site.push_back(c);
    } else if (key == "matrix") {
      std::string name;
      int d;
      ls >> name >> d;
      if (name != "phi") throw ValidationError("unknown matrix: " + name);
      app.phi = Operator::zero(d);
      for (int i = 0; i < d; ++i) {
        if (!next_data_line(line)) throw ValidationError("truncated manifest");
        std::istringstream rs(line);
        for (int j = 0; j < d; ++j) {
          double re, im;
          if (!(rs >> re >> im)) throw ValidationError("bad matrix row");
          app.phi.at(i, j) = cplx(re, im);
        }
      }
    } else if (key == "vector") {
      std::string name;
      int d;
      ls >> name >> d;
      StateVector v(d);
      for (int i = 0; i < d; ++i) {
        if (!next_data_line(line)) throw ValidationError("truncated manifest");
        std::istringstream rs(line);
        double re, im;
        if (!(rs >> re >> im)) throw ValidationError("bad vector entry");
        v.amps[i] = cplx(re, im);
      }
      if (name == "psi") {
        app.psi = v;
      } else if (name == "xi") {
        app.xi = v;
      } else if (name.rfind("X", 0) == 0) {
        size_t mu = std::stoul(name.substr(1));
        if (app.X.size() <= mu) app.X.resize(mu + 1, StateVector(d));
        app.X[mu] = v;
      } else if (name.rfind("eta", 0) == 0) {
        size_t mu = std::stoul(name.substr(3));
        if (app.eta.size() <= mu) app.eta.resize(mu + 1, StateVector(d));
        app.eta[mu] = v;
      } else {
        throw ValidationError("unknown vector: " + name);
      }
    } else {
      throw ValidationError("unknown manifest key: " + key);
    }
  }
  if (!have_l || !have_eps || !have_n || !have_dim)
    throw ValidationError("manifest missing header fields");
  if (static_cast<int>(app.charge_of_site.size()) != app.dim_h1)
    throw ValidationError("charge list does not match system dimension");
  for (int lam = -app.lambda_span(); lam <= app.lambda_span(); ++lam)
    app.h2_block_dims[lam] = app.block_dim();
  int H2 = app.h2_dim();
  if (app.xi.dim != H2 || static_cast<int>(app.X.size()) != app.dim_h1 ||
      static_cast<int>(app.eta.size()) != app.dim_h1)
    throw ValidationError("manifest vectors inconsistent with dimensions");
  for (const auto& v : app.X)
    if (v.dim != H2) throw ValidationError("pointer vector dimension");
  for (const auto& v : app.eta)
    if (v.dim != H2) throw ValidationError("noise vector dimension");
  return app;
}

}  // namespace qfv
