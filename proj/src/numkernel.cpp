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

#include "qfv/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qfv {

Operator::Operator(int dim) : dim_(dim), a_(static_cast<size_t>(dim) * dim, cplx(0, 0)) {
  if (dim <= 0) throw ValidationError("operator dimension must be positive");
}

Operator::Operator(int dim, std::vector<cplx> entries) : dim_(dim), a_(std::move(entries)) {
  if (dim <= 0) throw ValidationError("operator dimension must be positive");
  if (a_.size() != static_cast<size_t>(dim) * dim)
    throw DimensionMismatch("entry count does not match dim*dim");
}

Operator Operator::identity(int dim) {
  Operator I(dim);
  for (int i = 0; i < dim; ++i) I.at(i, i) = 1;
  return I;
}

Operator Operator::from_rows(const std::vector<std::vector<cplx>>& rows) {
  int d = static_cast<int>(rows.size());
  Operator A(d);
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(rows[i].size()) != d)
      throw DimensionMismatch("row length does not match dimension");
    for (int j = 0; j < d; ++j) A.at(i, j) = rows[i][j];
  }
  return A;
}

Operator Operator::outer(const StateVector& u, const StateVector& v) {
  if (u.dim != v.dim) throw DimensionMismatch("outer product dims differ");
  Operator A(u.dim);
  for (int i = 0; i < u.dim; ++i)
    for (int j = 0; j < u.dim; ++j) A.at(i, j) = u.amps[i] * std::conj(v.amps[j]);
  return A;
}

Operator Operator::adjoint() const {
  Operator B(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) B.at(i, j) = std::conj(at(j, i));
  return B;
}

cplx Operator::trace() const {
  cplx t = 0;
  for (int i = 0; i < dim_; ++i) t += at(i, i);
  return t;
}

double Operator::max_abs() const {
  double m = 0;
  for (const cplx& z : a_) m = std::max(m, std::abs(z));
  return m;
}

bool Operator::all_finite() const {
  for (const cplx& z : a_)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

bool Operator::is_hermitian(double tol) const {
  for (int i = 0; i < dim_; ++i)
    for (int j = i; j < dim_; ++j)
      if (std::abs(at(i, j) - std::conj(at(j, i))) > tol) return false;
  return true;
}

bool Operator::is_projector(double tol) const {
  if (!is_hermitian(tol)) return false;
  return max_abs_diff(*this * *this, *this) <= tol;
}

bool Operator::is_unitary(double tol) const {
  return max_abs_diff(adjoint() * *this, identity(dim_)) <= tol;
}

Operator Operator::operator+(const Operator& o) const {
  if (dim_ != o.dim_) throw DimensionMismatch("operator add dims differ");
  Operator B(dim_);
  for (size_t k = 0; k < a_.size(); ++k) B.a_[k] = a_[k] + o.a_[k];
  return B;
}

Operator Operator::operator-(const Operator& o) const {
  if (dim_ != o.dim_) throw DimensionMismatch("operator sub dims differ");
  Operator B(dim_);
  for (size_t k = 0; k < a_.size(); ++k) B.a_[k] = a_[k] - o.a_[k];
  return B;
}

Operator Operator::operator*(const Operator& o) const {
  if (dim_ != o.dim_) throw DimensionMismatch("operator mul dims differ");
  Operator B(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int k = 0; k < dim_; ++k) {
      cplx aik = at(i, k);
      if (aik == cplx(0, 0)) continue;
      for (int j = 0; j < dim_; ++j) B.at(i, j) += aik * o.at(k, j);
    }
  return B;
}

Operator Operator::operator*(cplx s) const {
  Operator B(dim_);
  for (size_t k = 0; k < a_.size(); ++k) B.a_[k] = a_[k] * s;
  return B;
}

StateVector Operator::apply(const StateVector& v) const {
  if (v.dim != dim_) throw DimensionMismatch("operator apply dims differ");
  StateVector w(dim_);
  for (int i = 0; i < dim_; ++i) {
    cplx s = 0;
    for (int j = 0; j < dim_; ++j) s += at(i, j) * v.amps[j];
    w.amps[i] = s;
  }
  return w;
}

Operator operator*(cplx s, const Operator& A) { return A * s; }

double max_abs_diff(const Operator& A, const Operator& B) {
  if (A.dim() != B.dim()) throw DimensionMismatch("max_abs_diff dims differ");
  double m = 0;
  for (int i = 0; i < A.dim(); ++i)
    for (int j = 0; j < A.dim(); ++j) m = std::max(m, std::abs(A.at(i, j) - B.at(i, j)));
  return m;
}

StateVector::StateVector(std::vector<cplx> a, std::string lab)
    : dim(static_cast<int>(a.size())), amps(std::move(a)), label(std::move(lab)) {}

StateVector StateVector::basis(int dim, int k, std::string lab) {
  StateVector v(dim);
  v.amps[k] = 1;
  v.label = std::move(lab);
  return v;
}

double StateVector::norm() const {
  double s = 0;
  for (const cplx& z : amps) s += std::norm(z);
  return std::sqrt(s);
}

StateVector StateVector::normalized() const {
  double n = norm();
  if (n == 0) throw ValidationError("cannot normalize the zero vector");
  return *this * cplx(1.0 / n, 0);
}

StateVector StateVector::operator+(const StateVector& o) const {
  if (dim != o.dim) throw DimensionMismatch("state add dims differ");
  StateVector w(dim);
  for (int i = 0; i < dim; ++i) w.amps[i] = amps[i] + o.amps[i];
  return w;
}

StateVector StateVector::operator-(const StateVector& o) const {
  if (dim != o.dim) throw DimensionMismatch("state sub dims differ");
  StateVector w(dim);
  for (int i = 0; i < dim; ++i) w.amps[i] = amps[i] - o.amps[i];
  return w;
}

StateVector StateVector::operator*(cplx s) const {
  StateVector w(dim);
  w.label = label;
  for (int i = 0; i < dim; ++i) w.amps[i] = amps[i] * s;
  return w;
}

cplx inner(const StateVector& u, const StateVector& v) {
  if (u.dim != v.dim) throw DimensionMismatch("inner product dims differ");
  cplx s = 0;
  for (int i = 0; i < u.dim; ++i) s += std::conj(u.amps[i]) * v.amps[i];
  return s;
}

DensityState::DensityState(Operator m, const TolerancePolicy& pol) : matrix(std::move(m)) {
  if (!matrix.is_hermitian(pol.eq_tol)) throw NotHermitian("density matrix not Hermitian");
  if (std::abs(matrix.trace() - cplx(1, 0)) > pol.eq_tol)
    throw ValidationError("density matrix trace not 1");
  EigenSystem es = hermitian_eigendecomposition(matrix, pol);
  if (es.values.front() < -pol.eq_tol) throw ValidationError("density matrix not positive");
}

DensityState DensityState::pure(const StateVector& psi, const TolerancePolicy& pol) {
  StateVector n = psi.normalized();
  return DensityState(Operator::outer(n, n), pol);
}

cplx DensityState::expect(const Operator& A) const { return (matrix * A).trace(); }

namespace {

// One two-sided Jacobi rotation zeroing A[p][q]. The 2x2 block
// [[a_pp, g],[conj(g), a_qq]] with g = |g| e^{i phi} diagonalizes via the
// real rotation of [[a_pp, |g|],[|g|, a_qq]] conjugated by diag(1, e^{i phi}).
void jacobi_rotate(Operator& A, Operator& V, int p, int q) {
  cplx g = A.at(p, q);
  double ag = std::abs(g);
  if (ag == 0) return;
  cplx phase = g / ag;
  double app = A.at(p, p).real();
  double aqq = A.at(q, q).real();
  double tau = (aqq - app) / (2 * ag);
  double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1 + tau * tau));
  double c = 1 / std::sqrt(1 + t * t);
  double s = t * c;
  // Column p gets (c, -s e^{-i phi}) mix, column q gets (s e^{i phi}, c).
  cplx sp = s * phase;
  int n = A.dim();
  for (int k = 0; k < n; ++k) {
    cplx akp = A.at(k, p), akq = A.at(k, q);
    A.at(k, p) = c * akp - std::conj(sp) * akq;
    A.at(k, q) = sp * akp + c * akq;
  }
  for (int k = 0; k < n; ++k) {
    cplx apk = A.at(p, k), aqk = A.at(q, k);
    A.at(p, k) = c * apk - sp * aqk;
    A.at(q, k) = std::conj(sp) * apk + c * aqk;
  }
  for (int k = 0; k < n; ++k) {
    cplx vkp = V.at(k, p), vkq = V.at(k, q);
    V.at(k, p) = c * vkp - std::conj(sp) * vkq;
    V.at(k, q) = sp * vkp + c * vkq;
  }
  A.at(p, q) = 0;
  A.at(q, p) = 0;
}

double max_offdiag(const Operator& A) {
  double m = 0;
  for (int i = 0; i < A.dim(); ++i)
    for (int j = i + 1; j < A.dim(); ++j) m = std::max(m, std::abs(A.at(i, j)));
  return m;
}

void fix_phase(StateVector& v, double threshold) {
  for (int i = 0; i < v.dim; ++i) {
    double m = std::abs(v.amps[i]);
    if (m > threshold) {
      cplx ph = std::conj(v.amps[i]) / m;
      for (int k = 0; k < v.dim; ++k) v.amps[k] *= ph;
      v.amps[i] = cplx(m, 0);
      return;
    }
  }
}

}  // namespace

EigenSystem hermitian_eigendecomposition(const Operator& A, const TolerancePolicy& pol) {
  if (!A.all_finite()) throw ValidationError("eigendecomposition input not finite");
  if (!A.is_hermitian(pol.eq_tol)) throw NotHermitian("eigendecomposition input not Hermitian");
  int n = A.dim();

  // Work on the symmetrized copy so eq_tol-level asymmetry cannot leak in.
  Operator W(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) W.at(i, j) = (A.at(i, j) + std::conj(A.at(j, i))) * 0.5;

  Operator V = Operator::identity(n);
  double scale = std::max(1.0, W.max_abs());
  double stop = 1e-15 * scale;
  const int max_sweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (max_offdiag(W) <= stop) {
      converged = true;
      break;
    }
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q)
        if (std::abs(W.at(p, q)) > stop * 1e-2) jacobi_rotate(W, V, p, q);
  }
  if (!converged && max_offdiag(W) > stop)
    throw ConvergenceFailure("Jacobi sweeps exceeded the 100-sweep cap");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return W.at(i, i).real() < W.at(j, j).real(); });

  EigenSystem es;
  es.values.reserve(n);
  es.vectors.reserve(n);
  for (int idx : order) {
    es.values.push_back(W.at(idx, idx).real());
    StateVector v(n);
    for (int k = 0; k < n; ++k) v.amps[k] = V.at(k, idx);
    double vmax = 0;
    for (const cplx& z : v.amps) vmax = std::max(vmax, std::abs(z));
    fix_phase(v, pol.rank_tol_factor * vmax);
    es.vectors.push_back(std::move(v));
  }
  return es;
}

Operator tensor_product(const Operator& A, const Operator& B) {
  int da = A.dim(), db = B.dim();
  Operator C(da * db);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j) {
      cplx aij = A.at(i, j);
      if (aij == cplx(0, 0)) continue;
      for (int k = 0; k < db; ++k)
        for (int l = 0; l < db; ++l) C.at(i * db + k, j * db + l) = aij * B.at(k, l);
    }
  return C;
}

StateVector tensor_product(const StateVector& x, const StateVector& y) {
  StateVector z(x.dim * y.dim);
  for (int i = 0; i < x.dim; ++i)
    for (int k = 0; k < y.dim; ++k) z.amps[i * y.dim + k] = x.amps[i] * y.amps[k];
  return z;
}

Operator partial_trace(const Operator& A, const std::vector<int>& dims,
                       const std::set<int>& traced_factor_indices) {
  int total = 1;
  for (int d : dims) total *= d;
  if (total != A.dim()) throw DimensionMismatch("partial_trace dims do not multiply to A.dim");
  for (int t : traced_factor_indices)
    if (t < 0 || t >= static_cast<int>(dims.size()))
      throw DimensionMismatch("traced factor index out of range");

  std::vector<int> kept;
  for (int f = 0; f < static_cast<int>(dims.size()); ++f)
    if (!traced_factor_indices.count(f)) kept.push_back(f);
  int dk = 1;
  for (int f : kept) dk *= dims[f];
  int dt = total / dk;

  // strides of each factor in the row-major multi-index
  int nf = static_cast<int>(dims.size());
  std::vector<int> stride(nf, 1);
  for (int f = nf - 2; f >= 0; --f) stride[f] = stride[f + 1] * dims[f + 1];

  std::vector<int> tlist(traced_factor_indices.begin(), traced_factor_indices.end());
  Operator R(dk);
  for (int ik = 0; ik < dk; ++ik) {
    // decode kept multi-index of ik
    int rem = ik, base_i = 0;
    for (size_t a = 0; a < kept.size(); ++a) {
      int block = 1;
      for (size_t b = a + 1; b < kept.size(); ++b) block *= dims[kept[b]];
      int digit = rem / block;
      rem %= block;
      base_i += digit * stride[kept[a]];
    }
    for (int jk = 0; jk < dk; ++jk) {
      int rem2 = jk, base_j = 0;
      for (size_t a = 0; a < kept.size(); ++a) {
        int block = 1;
        for (size_t b = a + 1; b < kept.size(); ++b) block *= dims[kept[b]];
        int digit = rem2 / block;
        rem2 %= block;
        base_j += digit * stride[kept[a]];
      }
      cplx s = 0;
      for (int it = 0; it < dt; ++it) {
        int rem3 = it, off = 0;
        for (size_t a = 0; a < tlist.size(); ++a) {
          int block = 1;
          for (size_t b = a + 1; b < tlist.size(); ++b) block *= dims[tlist[b]];
          int digit = rem3 / block;
          rem3 %= block;
          off += digit * stride[tlist[a]];
        }
        s += A.at(base_i + off, base_j + off);
      }
      R.at(ik, jk) = s;
    }
  }
  return R;
}

std::vector<StateVector> orthonormal_range_basis(const std::vector<StateVector>& vectors,
                                                 const TolerancePolicy& pol) {
  if (vectors.empty()) return {};
  int dim = vectors[0].dim;
  for (const auto& v : vectors)
    if (v.dim != dim) throw DimensionMismatch("range basis inputs have mixed dimensions");
  int k = static_cast<int>(vectors.size());

  // Jordan-Wielandt route: eigenvalues of [[0, X],[X*, 0]] are the singular
  // values in pairs +-sigma, so zero sigmas carry only linear roundoff and the
  // relative rank threshold stays meaningful. Eigenvectors are (u; v)/sqrt(2)
  // with u the left singular vector, i.e. the range basis vector.
  int n = dim + k;
  Operator H(n);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < k; ++j) {
      H.at(i, dim + j) = vectors[j].amps[i];
      H.at(dim + j, i) = std::conj(vectors[j].amps[i]);
    }
  EigenSystem es = hermitian_eigendecomposition(H, pol);

  double sigma_max = es.values.back();
  if (sigma_max <= 0) return {};
  double thresh = pol.rank_tol_factor * sigma_max;

  std::vector<StateVector> basis;
  for (int idx = n - 1; idx >= 0; --idx) {  // descending singular value
    double sigma = es.values[idx];
    if (sigma <= thresh) break;
    StateVector w(dim);
    for (int i = 0; i < dim; ++i) w.amps[i] = es.vectors[idx].amps[i] * std::sqrt(2.0);
    basis.push_back(std::move(w));
  }
  return basis;
}

Operator pauli_x() { return Operator::from_rows({{0, 1}, {1, 0}}); }
Operator pauli_y() { return Operator::from_rows({{0, cplx(0, -1)}, {cplx(0, 1), 0}}); }
Operator pauli_z() { return Operator::from_rows({{1, 0}, {0, -1}}); }

Rng::Rng(uint64_t seed) : eng_(seed) {}

uint64_t Rng::next_u64() { return eng_(); }

double Rng::uniform01() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform01();
  } while (u1 <= 0);
  u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

cplx Rng::cnormal() { return cplx(normal(), normal()); }

StateVector Rng::random_state(int dim) {
  StateVector v(dim);
  for (int i = 0; i < dim; ++i) v.amps[i] = cnormal();
  return v.normalized();
}

Operator Rng::random_hermitian(int dim) {
  Operator A(dim);
  for (int i = 0; i < dim; ++i) {
    A.at(i, i) = normal();
    for (int j = i + 1; j < dim; ++j) {
      cplx z = cnormal() * 0.7071067811865476;
      A.at(i, j) = z;
      A.at(j, i) = std::conj(z);
    }
  }
  return A;
}

Operator Rng::random_unitary(int dim) {
  for (;;) {
    std::vector<StateVector> cols;
    for (int j = 0; j < dim; ++j) {
      StateVector v(dim);
      for (int i = 0; i < dim; ++i) v.amps[i] = cnormal();
      cols.push_back(std::move(v));
    }
    std::vector<StateVector> basis = orthonormal_range_basis(cols);
    if (static_cast<int>(basis.size()) != dim) continue;  // rank-deficient draw
    Operator U(dim);
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i) U.at(i, j) = basis[j].amps[i];
    return U;
  }
}

DensityState Rng::random_density(int dim) {
  Operator A(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) A.at(i, j) = cnormal();
  Operator rho = A * A.adjoint();
  cplx tr = rho.trace();
  rho = rho * (1.0 / tr.real());
  // Symmetrize away roundoff before validation.
  Operator H(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) H.at(i, j) = (rho.at(i, j) + std::conj(rho.at(j, i))) * 0.5;
  return DensityState(H);
}

Operator Rng::random_ray_projector(int dim) {
  StateVector v = random_state(dim);
  return Operator::outer(v, v);
}

}  // namespace qfv
