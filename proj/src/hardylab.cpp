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

#include "qfv/hardylab.hpp"

#include <cmath>
#include <string>

namespace qfv {

// ---- dyadic arithmetic ----

Dyadic Dyadic::make(long long num, long long den) {
  if (den <= 0 || (den & (den - 1)) != 0) {
    throw PreconditionViolated("dyadic denominator must be a power of two");
  }
  Dyadic d;
  d.num = num;
  while (den > 1) {
    den >>= 1;
    ++d.shift;
  }
  return d.normalized();
}

Dyadic Dyadic::normalized() const {
  Dyadic d = *this;
  if (d.num == 0) {
    d.shift = 0;
    return d;
  }
  while (d.shift > 0 && d.num % 2 == 0) {
    d.num /= 2;
    --d.shift;
  }
  return d;
}

Dyadic Dyadic::operator+(const Dyadic& o) const {
  Dyadic r;
  r.shift = std::max(shift, o.shift);
  r.num = (num << (r.shift - shift)) + (o.num << (r.shift - o.shift));
  return r.normalized();
}

Dyadic Dyadic::operator-(const Dyadic& o) const { return *this + (-o); }

Dyadic Dyadic::operator*(const Dyadic& o) const {
  Dyadic r;
  r.num = num * o.num;
  r.shift = shift + o.shift;
  return r.normalized();
}

Dyadic Dyadic::operator-() const {
  Dyadic r = *this;
  r.num = -r.num;
  return r;
}

Dyadic Dyadic::half() const {
  Dyadic r = *this;
  if (r.num != 0) ++r.shift;
  return r;
}

Dyadic Dyadic::twice() const {
  Dyadic r = *this;
  if (r.shift > 0) {
    --r.shift;
  } else {
    r.num *= 2;
  }
  return r;
}

bool Dyadic::operator==(const Dyadic& o) const {
  return num == o.num && shift == o.shift;
}

double Dyadic::value() const {
  return static_cast<double>(num) / static_cast<double>(1LL << shift);
}

std::string Dyadic::fraction() const {
  if (num == 0) return "0/1";
  return std::to_string(num) + "/" + std::to_string(1LL << shift);
}

GaussianDyadic GaussianDyadic::operator+(const GaussianDyadic& o) const {
  return {re + o.re, im + o.im};
}

GaussianDyadic GaussianDyadic::operator-(const GaussianDyadic& o) const {
  return {re - o.re, im - o.im};
}

GaussianDyadic GaussianDyadic::operator*(const GaussianDyadic& o) const {
  return {re * o.re - im * o.im, re * o.im + im * o.re};
}

GaussianDyadic GaussianDyadic::operator-() const { return {-re, -im}; }

GaussianDyadic GaussianDyadic::conj() const { return {re, -im}; }

GaussianDyadic GaussianDyadic::times_i() const { return {-im, re}; }

bool GaussianDyadic::operator==(const GaussianDyadic& o) const {
  return re == o.re && im == o.im;
}

ExactAmp ExactAmp::zero() { return ExactAmp{}; }

ExactAmp ExactAmp::rational(long long num, long long den) {
  ExactAmp e;
  e.a.re = Dyadic::make(num, den);
  return e;
}

ExactAmp ExactAmp::imag_rational(long long num, long long den) {
  ExactAmp e;
  e.a.im = Dyadic::make(num, den);
  return e;
}

ExactAmp ExactAmp::root2(long long num, long long den) {
  ExactAmp e;
  e.b.re = Dyadic::make(num, den);
  return e;
}

ExactAmp ExactAmp::imag_root2(long long num, long long den) {
  ExactAmp e;
  e.b.im = Dyadic::make(num, den);
  return e;
}

ExactAmp ExactAmp::operator+(const ExactAmp& o) const {
  return {a + o.a, b + o.b};
}

ExactAmp ExactAmp::operator-(const ExactAmp& o) const {
  return {a - o.a, b - o.b};
}

ExactAmp ExactAmp::operator*(const ExactAmp& o) const {
  // (a1 + b1 r)(a2 + b2 r) with r^2 = 2.
  GaussianDyadic cross = b * o.b;
  return {a * o.a + GaussianDyadic{cross.re.twice(), cross.im.twice()},
          a * o.b + b * o.a};
}

ExactAmp ExactAmp::operator-() const { return {-a, -b}; }

ExactAmp ExactAmp::conj() const { return {a.conj(), b.conj()}; }

ExactAmp ExactAmp::times_i() const { return {a.times_i(), b.times_i()}; }

ExactAmp ExactAmp::div_sqrt2() const {
  return {b, GaussianDyadic{a.re.half(), a.im.half()}};
}

bool ExactAmp::operator==(const ExactAmp& o) const {
  return a == o.a && b == o.b;
}

ExactAmp ExactAmp::norm_sq() const { return *this * conj(); }

bool ExactAmp::is_plain_rational() const {
  return a.im.is_zero() && b.is_zero();
}

Dyadic ExactAmp::rational_part() const {
  if (!is_plain_rational()) {
    throw ValidationError("amplitude is not a plain rational");
  }
  return a.re;
}

cplx ExactAmp::approx() const {
  const double r = std::sqrt(2.0);
  return cplx(a.re.value() + r * b.re.value(), a.im.value() + r * b.im.value());
}

// ---- scenario evolution ----

namespace {

const char* kPreLabels[2][2] = {{"u+u-", "u+v-"}, {"v+u-", "v+v-"}};
const char* kPostLabels[2][2] = {{"c+c-", "c+d-"}, {"d+c-", "d+d-"}};

struct ExactGrid {
  ExactAmp amp[2][2];
  ExactAmp gamma;
};

// One side of a second splitter in exact arithmetic: u -> (c + id)/r2,
// v -> (d + ic)/r2; axis 0 transforms the + factor, axis 1 the - factor.
ExactGrid exact_bs2(const ExactGrid& in, int axis) {
  ExactGrid out;
  out.gamma = in.gamma;
  for (int p = 0; p < 2; ++p) {
    for (int m = 0; m < 2; ++m) {
      const ExactAmp& x = in.amp[p][m];
      if (x.is_zero()) continue;
      int other = axis == 0 ? m : p;
      int mode = axis == 0 ? p : m;
      auto slot = [&](int target) -> ExactAmp& {
        return axis == 0 ? out.amp[target][other] : out.amp[other][target];
      };
      if (mode == 0) {  // u
        slot(0) = slot(0) + x.div_sqrt2();
        slot(1) = slot(1) + x.times_i().div_sqrt2();
      } else {  // v
        slot(1) = slot(1) + x.div_sqrt2();
        slot(0) = slot(0) + x.times_i().div_sqrt2();
      }
    }
  }
  return out;
}

struct FloatGrid {
  cplx amp[2][2] = {};
  cplx gamma = 0;
};

// Same physics in plain doubles, written out independently so the exact
// route has a cross-check instead of a mirror.
FloatGrid float_bs2(const FloatGrid& in, int axis) {
  const double s = 1.0 / std::sqrt(2.0);
  FloatGrid out;
  out.gamma = in.gamma;
  for (int p = 0; p < 2; ++p) {
    for (int m = 0; m < 2; ++m) {
      cplx x = in.amp[p][m];
      if (x == cplx(0, 0)) continue;
      int other = axis == 0 ? m : p;
      int mode = axis == 0 ? p : m;
      auto slot = [&](int target) -> cplx& {
        return axis == 0 ? out.amp[target][other] : out.amp[other][target];
      };
      if (mode == 0) {
        slot(0) += x * s;
        slot(1) += x * cplx(0, 1) * s;
      } else {
        slot(1) += x * s;
        slot(0) += x * cplx(0, 1) * s;
      }
    }
  }
  return out;
}

HardyAmplitudes stage_from(HardyStage stage, const ExactGrid& eg,
                           const FloatGrid& fg, bool post) {
  HardyAmplitudes out;
  out.stage = stage;
  for (int p = 0; p < 2; ++p) {
    for (int m = 0; m < 2; ++m) {
      const char* label = post ? kPostLabels[p][m] : kPreLabels[p][m];
      out.exact[label] = eg.amp[p][m];
      out.numeric[label] = fg.amp[p][m];
    }
  }
  out.exact["gamma"] = eg.gamma;
  out.numeric["gamma"] = fg.gamma;
  return out;
}

}  // namespace

HardyRun run_scenario(const ApparatusConfig& cfg) {
  HardyRun run;
  run.cfg = cfg;

  HardyAmplitudes initial;
  initial.stage = HardyStage::kInitial;
  initial.exact["s+s-"] = ExactAmp::rational(1, 1);
  initial.numeric["s+s-"] = cplx(1, 0);
  run.stages[0] = initial;

  // First splitters: s -> (v + iu)/r2 on each side, assembled as a
  // product of the per-side amplitude pairs.
  ExactAmp eu = ExactAmp::imag_root2(1, 2);  // i/r2
  ExactAmp ev = ExactAmp::root2(1, 2);       // 1/r2
  ExactGrid eg;
  ExactAmp eside[2] = {eu, ev};
  for (int p = 0; p < 2; ++p) {
    for (int m = 0; m < 2; ++m) eg.amp[p][m] = eside[p] * eside[m];
  }

  const double s = 1.0 / std::sqrt(2.0);
  cplx fu(0, s), fv(s, 0);
  FloatGrid fg;
  cplx fside[2] = {fu, fv};
  for (int p = 0; p < 2; ++p) {
    for (int m = 0; m < 2; ++m) fg.amp[p][m] = fside[p] * fside[m];
  }
  run.stages[1] = stage_from(HardyStage::kPostBs1, eg, fg, false);

  // Annihilation: the u+u- amplitude moves wholesale to the gamma channel.
  eg.gamma = eg.amp[0][0];
  eg.amp[0][0] = ExactAmp::zero();
  fg.gamma = fg.amp[0][0];
  fg.amp[0][0] = 0;
  run.stages[2] = stage_from(HardyStage::kPostAnnihilation, eg, fg, false);

  // Second splitters where placed; an absent splitter is the relabeling
  // c = u, d = v, which the grid encodes as doing nothing.
  if (cfg.bs2_plus_present) {
    eg = exact_bs2(eg, 0);
    fg = float_bs2(fg, 0);
  }
  if (cfg.bs2_minus_present) {
    eg = exact_bs2(eg, 1);
    fg = float_bs2(fg, 1);
  }
  run.stages[3] = stage_from(HardyStage::kFinal, eg, fg, true);
  return run;
}

const ExactAmp& HardyAmplitudes::amp(const std::string& label) const {
  auto it = exact.find(label);
  if (it == exact.end()) throw ValidationError("unknown channel: " + label);
  return it->second;
}

cplx HardyAmplitudes::num(const std::string& label) const {
  auto it = numeric.find(label);
  if (it == numeric.end()) throw ValidationError("unknown channel: " + label);
  return it->second;
}

double HardyAmplitudes::total_probability() const {
  double t = 0;
  for (const auto& [label, v] : numeric) t += std::norm(v);
  return t;
}

ExactAmp HardyAmplitudes::total_probability_exact() const {
  ExactAmp t = ExactAmp::zero();
  for (const auto& [label, v] : exact) t = t + v.norm_sq();
  return t;
}

CoincidenceResult coincidence_probability(const ApparatusConfig& cfg) {
  HardyRun run = run_scenario(cfg);
  const HardyAmplitudes& fin = run.final_stage();

  CoincidenceResult res;
  res.config_supported = cfg.bs2_plus_present && cfg.bs2_minus_present;
  if (res.config_supported) {
    res.channel = "d+d-";
  } else if (!cfg.bs2_plus_present && !cfg.bs2_minus_present) {
    res.channel = "c+c-";
    res.note =
        "headline coincidence needs both second splitters; reporting the "
        "vanishing bright pair of the open configuration";
  } else {
    res.channel = "d+d-";
    res.note =
        "headline coincidence needs both second splitters; reporting the "
        "vanishing dark pair of this one-sided configuration";
  }

  for (const auto& [label, v] : fin.exact) {
    res.channel_probabilities[label] = v.norm_sq().rational_part().fraction();
  }
  for (const auto& [label, v] : fin.numeric) {
    res.channel_numeric[label] = std::norm(v);
  }
  res.exact = res.channel_probabilities.at(res.channel);
  res.numeric = res.channel_numeric.at(res.channel);
  return res;
}

SingleArmResult single_interferometer() {
  SingleArmResult r;
  ExactAmp u = ExactAmp::imag_root2(1, 2);
  ExactAmp v = ExactAmp::root2(1, 2);
  r.c = u.div_sqrt2() + v.times_i().div_sqrt2();
  r.d = u.times_i().div_sqrt2() + v.div_sqrt2();

  const double s = 1.0 / std::sqrt(2.0);
  cplx fu(0, s), fv(s, 0);
  r.c_num = fu * s + fv * cplx(0, 1) * s;
  r.d_num = fu * cplx(0, 1) * s + fv * s;
  return r;
}

LhvResult lhv_search() {
  LhvResult res;
  bool dark_pair = false;
  for (int cp = 0; cp <= 1; ++cp) {
    for (int cm = 0; cm <= 1; ++cm) {
      for (int dp = 0; dp <= 1; ++dp) {
        for (int dm = 0; dm <= 1; ++dm) {
          if (cp * cm != 0) continue;          // no bright coincidence
          if (dp == 1 && cm != 1) continue;    // dark + implies bright -
          if (dm == 1 && cp != 1) continue;    // dark - implies bright +
          res.feasible.push_back({cp, cm, dp, dm});
          dark_pair = dark_pair || (dp * dm == 1);
        }
      }
    }
  }
  res.contradiction = !dark_pair;
  return res;
}

}  // namespace qfv
