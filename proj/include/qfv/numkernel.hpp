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

#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

// Dense complex linear algebra for small dimensions. Everything here is a
// pure value type: operations return new objects and never mutate inputs,
// so all of it is safe to share across threads.

namespace qfv {

using cplx = std::complex<double>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct NotHermitian : Error {
  using Error::Error;
};
struct ConvergenceFailure : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct PreconditionViolated : Error {
  using Error::Error;
};

// Equality checks are max-entry comparisons at eq_tol; rank decisions use a
// relative threshold rank_tol_factor * sigma_max.
struct TolerancePolicy {
  double eq_tol = 1e-9;
  double rank_tol_factor = 1e-12;
};

class Operator {
 public:
  explicit Operator(int dim);
  Operator(int dim, std::vector<cplx> entries);
  static Operator identity(int dim);
  static Operator zero(int dim) { return Operator(dim); }
  static Operator from_rows(const std::vector<std::vector<cplx>>& rows);
  // Rank-1 |u><v|.
  static Operator outer(const struct StateVector& u, const struct StateVector& v);

  int dim() const { return dim_; }
  cplx& at(int i, int j) { return a_[static_cast<size_t>(i) * dim_ + j]; }
  const cplx& at(int i, int j) const { return a_[static_cast<size_t>(i) * dim_ + j]; }

  Operator adjoint() const;
  cplx trace() const;
  double max_abs() const;
  bool all_finite() const;

  bool is_hermitian(double tol) const;
  bool is_projector(double tol) const;
  bool is_unitary(double tol) const;

  Operator operator+(const Operator& o) const;
  Operator operator-(const Operator& o) const;
  Operator operator*(const Operator& o) const;
  Operator operator*(cplx s) const;
  struct StateVector apply(const struct StateVector& v) const;

 private:
  int dim_;
  std::vector<cplx> a_;
};

Operator operator*(cplx s, const Operator& A);
double max_abs_diff(const Operator& A, const Operator& B);

struct StateVector {
  int dim = 0;
  std::vector<cplx> amps;
  std::string label;

  StateVector() = default;
  explicit StateVector(int d) : dim(d), amps(d, cplx(0, 0)) {}
  StateVector(std::vector<cplx> a, std::string lab = "");
  static StateVector basis(int dim, int k, std::string lab = "");

  double norm() const;
  StateVector normalized() const;
  StateVector operator+(const StateVector& o) const;
  StateVector operator-(const StateVector& o) const;
  StateVector operator*(cplx s) const;
};

// Conjugate-linear in the first argument.
cplx inner(const StateVector& u, const StateVector& v);

struct DensityState {
  Operator matrix;
  // Validates Hermiticity, positivity up to -tol, unit trace.
  DensityState(Operator m, const TolerancePolicy& pol = {});
  static DensityState pure(const StateVector& psi, const TolerancePolicy& pol = {});
  int dim() const { return matrix.dim(); }
  // tr(rho A)
  cplx expect(const Operator& A) const;
};

struct EigenSystem {
  std::vector<double> values;        // ascending
  std::vector<StateVector> vectors;  // orthonormal, phase-fixed
};

// Cyclic Jacobi on the Hermitian input; 100-sweep cap. Phase convention:
// the first component of each eigenvector above the rank threshold is made
// real and nonnegative, so outputs are reproducible run to run.
EigenSystem hermitian_eigendecomposition(const Operator& A, const TolerancePolicy& pol = {});

Operator tensor_product(const Operator& A, const Operator& B);
StateVector tensor_product(const StateVector& x, const StateVector& y);

// dims lists the tensor factors (product equals A.dim); traced_factor_indices
// are positions into dims, 0-based.
Operator partial_trace(const Operator& A, const std::vector<int>& dims,
                       const std::set<int>& traced_factor_indices);

// Orthonormal basis of the span via the Gram-matrix route; rank decided by
// singular values relative to the largest one.
std::vector<StateVector> orthonormal_range_basis(const std::vector<StateVector>& vectors,
                                                 const TolerancePolicy& pol = {});

Operator pauli_x();
Operator pauli_y();
Operator pauli_z();

// Deterministic random source. mt19937_64 with explicit double extraction,
// so values depend only on the seed, not on library internals.
class Rng {
 public:
  explicit Rng(uint64_t seed);
  uint64_t next_u64();
  double uniform01();  // [0,1)
  double normal();
  cplx cnormal();
  StateVector random_state(int dim);
  Operator random_hermitian(int dim);
  Operator random_unitary(int dim);
  DensityState random_density(int dim);
  // Rank-1 projector onto a random ray.
  Operator random_ray_projector(int dim);

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0;
};

}  // namespace qfv
