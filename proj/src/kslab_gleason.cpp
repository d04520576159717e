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

#include "qfv/kslab.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace qfv {

namespace {

// Real basis of the Hermitian d x d matrices: the diagonal units, then
// for each i < j the symmetric and antisymmetric off-diagonal pair.
std::vector<Operator> hermitian_basis(int d) {
  std::vector<Operator> basis;
  for (int i = 0; i < d; ++i) {
    Operator e(d);
    e.at(i, i) = 1;
    basis.push_back(e);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      Operator s(d);
      s.at(i, j) = 1;
      s.at(j, i) = 1;
      basis.push_back(s);
      Operator a(d);
      a.at(i, j) = cplx(0, 1);
      a.at(j, i) = cplx(0, -1);
      basis.push_back(a);
    }
  }
  return basis;
}

double quad_form(const StateVector& x, const Operator& H) {
  return inner(x, H.apply(x)).real();
}

}  // namespace

GleasonFit gleason_fit(const std::vector<GleasonSample>& samples, int d) {
  if (d < 2) throw ValidationError("dimension must be at least 2");
  std::vector<Operator> basis = hermitian_basis(d);
  int D = static_cast<int>(basis.size());

  for (size_t s = 0; s < samples.size(); ++s) {
    const GleasonSample& smp = samples[s];
    std::string tag = "sample " + std::to_string(s) + ": ";
    if (static_cast<int>(smp.basis.size()) != d ||
        smp.weights.size() != smp.basis.size()) {
      throw ValidationError(tag + "needs " + std::to_string(d) +
                            " basis vectors with one weight each");
    }
    for (int i = 0; i < d; ++i) {
      if (smp.basis[i].dim != d) {
        throw ValidationError(tag + "basis vector dimension mismatch");
      }
      if (!std::isfinite(smp.weights[i])) {
        throw ValidationError(tag + "non-finite weight");
      }
      for (int j = 0; j < d; ++j) {
        double target = i == j ? 1.0 : 0.0;
        if (std::abs(std::abs(inner(smp.basis[i], smp.basis[j])) - target) >
            1e-8) {
          throw ValidationError(tag + "basis is not orthonormal");
        }
      }
    }
  }

  // Normal equations for the least-squares Hermitian fit, solved through
  // the eigenvalue pseudo-inverse so rank deficiency surfaces as an
  // underdetermined flag instead of a blow-up.
  Operator M(D);
  std::vector<double> rhs(D, 0.0);
  std::vector<double> row(D);
  for (const GleasonSample& smp : samples) {
    for (int i = 0; i < d; ++i) {
      for (int k = 0; k < D; ++k) row[k] = quad_form(smp.basis[i], basis[k]);
      for (int a = 0; a < D; ++a) {
        for (int b = 0; b < D; ++b) {
          M.at(a, b) += row[a] * row[b];
        }
        rhs[a] += smp.weights[i] * row[a];
      }
    }
  }

  EigenSystem eig = hermitian_eigendecomposition(M);
  double lead = 0;
  for (double lam : eig.values) lead = std::max(lead, std::abs(lam));
  double thresh = lead * 1e-12;

  GleasonFit fit(d);
  std::vector<cplx> coeff(D, cplx(0, 0));
  for (int k = 0; k < D; ++k) {
    if (eig.values[k] <= thresh) continue;
    ++fit.rank;
    cplx proj(0, 0);
    for (int a = 0; a < D; ++a) {
      proj += std::conj(eig.vectors[k].amps[a]) * rhs[a];
    }
    proj /= eig.values[k];
    for (int a = 0; a < D; ++a) coeff[a] += proj * eig.vectors[k].amps[a];
  }
  fit.underdetermined = fit.rank < D;
  for (int a = 0; a < D; ++a) {
    fit.T = fit.T + coeff[a].real() * basis[a];
  }
  // Hermitize against roundoff from the coefficient recombination.
  fit.T = (fit.T + fit.T.adjoint()) * cplx(0.5, 0);

  for (const GleasonSample& smp : samples) {
    for (int i = 0; i < d; ++i) {
      double predicted = quad_form(smp.basis[i], fit.T);
      fit.residual =
          std::max(fit.residual, std::abs(smp.weights[i] - predicted));
    }
  }
  return fit;
}

Dim2Measure dim2_two_valued_measure(const std::vector<int>& g_table) {
  int n = static_cast<int>(g_table.size());
  if (n < 1) throw ValidationError("grid table must not be empty");
  for (int gv : g_table) {
    if (gv != 0 && gv != 1) {
      throw ValidationError("grid table entries must be 0 or 1");
    }
  }

  // Quarter-turn extension of g to the full circle: the value repeats
  // with period pi and flips across each quarter turn, which is exactly
  // what assigning mu(P) + mu(P_perp) = 1 to every frame forces.
  Dim2Measure out;
  out.mu.resize(4 * n);
  for (int k = 0; k < 4 * n; ++k) {
    int quarter = k / n;
    int base = k % n;
    if (quarter == 0 || quarter == 2) {
      out.mu[k] = g_table[base];
    } else {
      out.mu[k] = 1 - g_table[base];
    }
  }

  int non_binary = 0;
  for (int m : out.mu) non_binary += m != 0 && m != 1;
  out.report.add("two_valued", non_binary == 0, non_binary, 0, 0);

  int additivity_violations = 0;
  int sign_violations = 0;
  for (int k = 0; k < 4 * n; ++k) {
    additivity_violations += out.mu[k] + out.mu[(k + n) % (4 * n)] != 1;
    sign_violations += out.mu[k] != out.mu[(k + 2 * n) % (4 * n)];
  }
  out.report.add("orthogonal_pair_additivity", additivity_violations == 0,
                 additivity_violations, 0, 0);
  out.report.add("sign_flip_invariance", sign_violations == 0, sign_violations,
                 0, 0);
  return out;
}

}  // namespace qfv
