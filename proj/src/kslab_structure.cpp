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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace qfv {

namespace {

std::string trimmed(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string line_tag(int lineno) {
  return "ray file line " + std::to_string(lineno) + ": ";
}

double ray_norm(const std::vector<double>& coords) {
  double s = 0;
  for (double c : coords) s += c * c;
  return std::sqrt(s);
}

void validate_ray(Ray* r) {
  if (!r->valid) return;
  for (double c : r->coords) {
    if (!std::isfinite(c)) {
      r->valid = false;
      r->note = "non-finite coordinate";
      return;
    }
  }
  r->norm_error = std::abs(ray_norm(r->coords) - 1.0);
  if (r->norm_error > 1e-9) {
    std::ostringstream msg;
    msg << "norm deviates from 1 by " << r->norm_error;
    r->valid = false;
    r->note = msg.str();
  }
}

// All maximal cliques, each sorted ascending, via pivoted Bron-Kerbosch.
// Vertex sets are kept sorted so the traversal order is deterministic.
void maximal_cliques(const std::vector<std::vector<char>>& adj,
                     std::vector<int>* R, std::vector<int> P,
                     std::vector<int> X,
                     std::vector<std::vector<int>>* out) {
  if (P.empty() && X.empty()) {
    out->push_back(*R);
    return;
  }
  int pivot = -1, best = -1;
  for (int u : P) {
    int deg = 0;
    for (int v : P) deg += adj[u][v];
    if (deg > best) { best = deg; pivot = u; }
  }
  for (int u : X) {
    int deg = 0;
    for (int v : P) deg += adj[u][v];
    if (deg > best) { best = deg; pivot = u; }
  }
  std::vector<int> candidates;
  for (int u : P) {
    if (!adj[pivot][u]) candidates.push_back(u);
  }
  for (int u : candidates) {
    std::vector<int> P2, X2;
    for (int v : P) {
      if (adj[u][v]) P2.push_back(v);
    }
    for (int v : X) {
      if (adj[u][v]) X2.push_back(v);
    }
    R->push_back(u);
    maximal_cliques(adj, R, std::move(P2), std::move(X2), out);
    R->pop_back();
    P.erase(std::find(P.begin(), P.end(), u));
    X.insert(std::lower_bound(X.begin(), X.end(), u), u);
  }
}

}  // namespace

std::vector<Ray> load_rays(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open ray file: " + path);
  std::vector<Ray> rays;
  std::set<std::string> seen;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::string line = trimmed(raw);
    if (line.empty()) continue;
    size_t colon = line.find(':');
    if (colon == std::string::npos) {
      throw ValidationError(line_tag(lineno) + "missing ':' after ray id");
    }
    Ray r;
    r.id = trimmed(line.substr(0, colon));
    if (r.id.empty()) {
      throw ValidationError(line_tag(lineno) + "empty ray id");
    }
    if (!seen.insert(r.id).second) {
      throw ValidationError(line_tag(lineno) + "duplicate ray id '" + r.id +
                            "'");
    }
    std::string rest = line.substr(colon + 1);
    size_t start = 0;
    int field = 0;
    while (true) {
      size_t semi = rest.find(';', start);
      std::string piece = trimmed(
          semi == std::string::npos ? rest.substr(start)
                                    : rest.substr(start, semi - start));
      ++field;
      if (piece.empty()) {
        throw ValidationError(line_tag(lineno) + "empty coordinate expression");
      }
      try {
        RadicalExpr e = parse_radical(piece);
        r.coords.push_back(e.value);
        r.source.push_back(std::move(e));
      } catch (const Error& err) {
        if (r.valid) {
          r.valid = false;
          r.note = "coordinate " + std::to_string(field) + ": " + err.what();
        }
        RadicalExpr broken;
        broken.text = piece;
        r.coords.push_back(0.0);
        r.source.push_back(std::move(broken));
      }
      if (semi == std::string::npos) break;
      start = semi + 1;
    }
    validate_ray(&r);
    rays.push_back(std::move(r));
  }
  return rays;
}

int GreechieStructure::index_of(const std::string& id) const {
  for (size_t i = 0; i < rays.size(); ++i) {
    if (rays[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

const Ray& GreechieStructure::ray(const std::string& id) const {
  int i = index_of(id);
  if (i < 0) throw ValidationError("unknown ray id '" + id + "'");
  return rays[i];
}

GreechieStructure derive_structure(const std::vector<Ray>& rays_in, int d,
                                   double ortho_tol) {
  if (d < 2) throw ValidationError("dimension must be at least 2");
  if (!(ortho_tol > 0)) throw ValidationError("orthogonality tolerance must be positive");
  GreechieStructure g;
  g.d = d;
  g.ortho_tol = ortho_tol;

  int invalid = 0;
  int merged = 0;
  for (Ray r : rays_in) {
    if (r.valid && static_cast<int>(r.coords.size()) != d) {
      std::ostringstream msg;
      msg << "expected " << d << " coordinates, got " << r.coords.size();
      r.valid = false;
      r.note = msg.str();
    }
    validate_ray(&r);
    if (!r.valid) {
      ++invalid;
      g.report.add_text("ray_" + r.id, false, r.note, "valid ray");
      continue;
    }
    // Sign canonicalization: first component of magnitude above 1e-12
    // made positive, so v and -v land on the same representative.
    for (double c : r.coords) {
      if (std::abs(c) > 1e-12) {
        if (c < 0) {
          for (double& x : r.coords) x = -x;
        }
        break;
      }
    }
    bool duplicate = false;
    for (const Ray& prev : g.rays) {
      double dev = 0;
      for (int k = 0; k < d; ++k) {
        dev = std::max(dev, std::abs(prev.coords[k] - r.coords[k]));
      }
      if (dev <= ortho_tol) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) {
      ++merged;
      continue;
    }
    g.rays.push_back(std::move(r));
  }

  int n = static_cast<int>(g.rays.size());
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  double nearest = 0;
  bool have_nearest = false;
  int suspicious = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double dot = 0;
      for (int k = 0; k < d; ++k) dot += g.rays[i].coords[k] * g.rays[j].coords[k];
      double mag = std::abs(dot);
      if (mag <= ortho_tol) {
        adj[i][j] = adj[j][i] = 1;
        g.ortho_edges.emplace_back(i, j);
      } else {
        if (mag <= 1e-4) ++suspicious;
        if (!have_nearest || mag < nearest) {
          nearest = mag;
          have_nearest = true;
        }
      }
    }
  }

  std::vector<std::vector<int>> cliques;
  {
    std::vector<int> R, P(n), X;
    for (int i = 0; i < n; ++i) P[i] = i;
    maximal_cliques(adj, &R, std::move(P), std::move(X), &cliques);
  }
  int oversized = 0, isolated = 0, bare = 0;
  for (auto& c : cliques) {
    std::sort(c.begin(), c.end());
    int size = static_cast<int>(c.size());
    if (size == d) {
      g.contexts.push_back(c);
    } else if (size > d) {
      ++oversized;
    } else if (size == 1) {
      ++isolated;
    } else if (size == 2) {
      ++bare;
    }
  }
  std::sort(g.contexts.begin(), g.contexts.end());

  CheckReport& rep = g.report;
  rep.add("rays_total", true, rays_in.size(), rays_in.size(), 0);
  rep.add("rays_valid", invalid == 0, rays_in.size() - invalid, rays_in.size(),
          0);
  rep.add("rays_merged", true, merged, merged, 0);
  rep.add("rays_distinct", true, n, n, 0);
  rep.add("ortho_edges", true, g.ortho_edges.size(), g.ortho_edges.size(), 0);
  rep.add("contexts", true, g.contexts.size(), g.contexts.size(), 0);
  rep.add("bare_edges", true, bare, bare, 0);
  if (oversized > 0) {
    rep.add("oversized_cliques", false, oversized, 0, 0);
  } else {
    rep.add("oversized_cliques", true, 0, 0, 0);
  }
  if (isolated > 0) {
    rep.warn("isolated_rays", isolated, 0, 0);
  } else {
    rep.add("isolated_rays", true, 0, 0, 0);
  }
  // Overlaps just above the tolerance are the signature of mistyped ray
  // data: a pair meant to be orthogonal that misses the cut.
  if (suspicious > 0) {
    rep.warn("suspicious_overlaps", suspicious, 0, 0);
  } else {
    rep.add("suspicious_overlaps", true, 0, 0, 0);
  }
  if (have_nearest) {
    rep.add("nearest_nonorthogonal_overlap", true, nearest, nearest, 0);
  }
  return g;
}

}  // namespace qfv
