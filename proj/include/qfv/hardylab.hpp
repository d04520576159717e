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

#ifndef QFV_HARDYLAB_HPP_
#define QFV_HARDYLAB_HPP_

#include <array>
#include <map>
#include <string>
#include <vector>

#include "qfv/numkernel.hpp"

namespace qfv {

// Dyadic rational num / 2^shift, kept normalized (num odd, or zero with
// shift 0).  Everything the twin interferometer produces lives here.
struct Dyadic {
  long long num = 0;
  int shift = 0;

  static Dyadic make(long long num, long long den);  // den a power of two
  Dyadic normalized() const;
  Dyadic operator+(const Dyadic& o) const;
  Dyadic operator-(const Dyadic& o) const;
  Dyadic operator*(const Dyadic& o) const;
  Dyadic operator-() const;
  Dyadic half() const;
  Dyadic twice() const;
  bool operator==(const Dyadic& o) const;
  bool is_zero() const { return num == 0; }
  double value() const;
  std::string fraction() const;  // "p/q" with q a power of two
};

struct GaussianDyadic {
  Dyadic re, im;

  GaussianDyadic operator+(const GaussianDyadic& o) const;
  GaussianDyadic operator-(const GaussianDyadic& o) const;
  GaussianDyadic operator*(const GaussianDyadic& o) const;
  GaussianDyadic operator-() const;
  GaussianDyadic conj() const;
  GaussianDyadic times_i() const;
  bool operator==(const GaussianDyadic& o) const;
  bool is_zero() const { return re.is_zero() && im.is_zero(); }
};

// Exact scalar a + b*sqrt(2) with Gaussian dyadic a, b: the smallest ring
// closed under the beam splitter 1/sqrt(2) factors and the phase i.
struct ExactAmp {
  GaussianDyadic a, b;

  static ExactAmp zero();
  static ExactAmp rational(long long num, long long den);
  static ExactAmp imag_rational(long long num, long long den);
  static ExactAmp root2(long long num, long long den);
  static ExactAmp imag_root2(long long num, long long den);

  ExactAmp operator+(const ExactAmp& o) const;
  ExactAmp operator-(const ExactAmp& o) const;
  ExactAmp operator*(const ExactAmp& o) const;
  ExactAmp operator-() const;
  ExactAmp conj() const;
  ExactAmp times_i() const;
  ExactAmp div_sqrt2() const;
  bool operator==(const ExactAmp& o) const;
  bool is_zero() const { return a.is_zero() && b.is_zero(); }
  // |amp|^2; for the amplitudes arising here the sqrt(2) and imaginary
  // parts cancel, leaving a plain dyadic probability.
  ExactAmp norm_sq() const;
  bool is_plain_rational() const;  // no imaginary and no sqrt(2) part
  Dyadic rational_part() const;    // requires is_plain_rational
  cplx approx() const;
};

enum class HardyStage { kInitial, kPostBs1, kPostAnnihilation, kFinal };

struct ApparatusConfig {
  bool bs2_plus_present = false;
  bool bs2_minus_present = false;
};

// Channel amplitudes at one stage, labeled in the mode language current
// at that stage (s before the first splitters, u/v after, c/d after the
// second splitters) plus the single annihilation channel "gamma".  The
// exact and numeric maps are filled by two independent arithmetic routes.
struct HardyAmplitudes {
  HardyStage stage = HardyStage::kInitial;
  std::map<std::string, ExactAmp> exact;
  std::map<std::string, cplx> numeric;

  const ExactAmp& amp(const std::string& label) const;
  cplx num(const std::string& label) const;
  double total_probability() const;        // float route
  ExactAmp total_probability_exact() const;
};

struct HardyRun {
  ApparatusConfig cfg;
  std::array<HardyAmplitudes, 4> stages;  // initial, post_bs1, post_annihilation, final
  const HardyAmplitudes& final_stage() const { return stages[3]; }
};

// Evolves s+ x s- through both first splitters, the annihilation channel,
// and whichever second splitters the configuration places.
HardyRun run_scenario(const ApparatusConfig& cfg);

struct ConfigUnsupported : Error {
  using Error::Error;
};

// The configuration's paradox coincidence: both dark detectors for the
// fully assembled setup, the bright pair when no second splitter is
// placed.  The headline exact value needs both splitters; other
// configurations still get their probability, with the caveat noted.
struct CoincidenceResult {
  std::string channel;
  std::string exact;  // "p/q"
  double numeric = 0.0;
  bool config_supported = false;
  std::string note;
  std::map<std::string, std::string> channel_probabilities;
  std::map<std::string, double> channel_numeric;
};

CoincidenceResult coincidence_probability(const ApparatusConfig& cfg);

// One interferometer, no annihilation: the arms recombine onto the bright
// detector with amplitude i and the dark port stays empty.
struct SingleArmResult {
  ExactAmp c, d;
  cplx c_num, d_num;
};

SingleArmResult single_interferometer();

struct LhvAssignment {
  int c_plus = 0, c_minus = 0, d_plus = 0, d_minus = 0;
};

struct LhvResult {
  std::vector<LhvAssignment> feasible;
  bool contradiction = false;
};

// All 16 detector value assignments against the three classical
// constraints; contradiction means none of the survivors lights both
// dark detectors, while the quantum probability for that is 1/16.
LhvResult lhv_search();

}  // namespace qfv

#endif  // QFV_HARDYLAB_HPP_
