#pragma once

// Least-squares integration of a masked gradient field. Each 4-connected
// component of the valid set is solved on its own, so every component
// carries its own additive gauge.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "shadex/components.hpp"
#include "shadex/descriptors.hpp"
#include "shadex/error.hpp"
#include "shadex/parallel.hpp"
#include "shadex/solver.hpp"

namespace shadex {

struct IntegrationOptions {
  double tol = 1e-8;
  std::size_t iteration_cap = 50000;  // per component: min(10 * size, cap)
};

struct ComponentGauge {
  std::size_t size = 0;
  double target = 0.0;  // mean of the component's values
  std::size_t iterations = 0;
  double residual = 0.0;
};

struct SparseShading {
  ScalarField field;  // valid exactly on the gradient field's valid set
  Labeling components;
  std::vector<ComponentGauge> gauges;

  int width() const noexcept { return field.width(); }
  int height() const noexcept { return field.height(); }
};

namespace detail {

struct ComponentSystem {
  std::vector<std::size_t> pixels;  // raster indices, ascending
  // Forward-difference constraints f[to] - f[from] ~ target.
  struct Edge {
    std::size_t from, to;
    double target;
  };
  std::vector<Edge> edges;
};

inline std::vector<ComponentSystem> build_component_systems(const GradientField& g,
                                                            const Labeling& lab) {
  std::vector<ComponentSystem> sys(lab.count);
  std::vector<std::size_t> local(g.gx.size(), 0);
  for (std::size_t i = 0; i < g.gx.size(); ++i) {
    const int l = lab.labels[i];
    if (l < 0) continue;
    local[i] = sys[l].pixels.size();
    sys[l].pixels.push_back(i);
  }
  const int w = g.width();
  const int h = g.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = lab.labels.index(x, y);
      const int l = lab.labels[i];
      if (l < 0) continue;
      if (x + 1 < w && lab.labels[i + 1] == l)
        sys[l].edges.push_back({local[i], local[i + 1], g.gx[i]});
      if (y + 1 < h && lab.labels[i + w] == l)
        sys[l].edges.push_back({local[i], local[i + w], g.gy[i]});
    }
  }
  return sys;
}

struct ComponentSolution {
  std::vector<double> values;
  CgResult cg;
};

inline ComponentSolution solve_component(const ComponentSystem& s,
                                         const IntegrationOptions& opt) {
  const std::size_t n = s.pixels.size();
  ComponentSolution out{std::vector<double>(n, 0.0), {}};
  if (n == 1) {
    out.cg.converged = true;
    return out;
  }
  std::vector<double> diag(n, 0.0), rhs(n, 0.0);
  for (const auto& e : s.edges) {
    diag[e.from] += 1.0;
    diag[e.to] += 1.0;
    rhs[e.to] += e.target;
    rhs[e.from] -= e.target;
  }
  auto apply = [&](std::span<const double> in, std::span<double> res) {
    for (std::size_t i = 0; i < n; ++i) res[i] = diag[i] * in[i];
    for (const auto& e : s.edges) {
      res[e.from] -= in[e.to];
      res[e.to] -= in[e.from];
    }
  };
  // Start from a breadth-first path integration: exact when the field is
  // integrable, so CG only has to spread the inconsistency.
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& e : s.edges) {
    adj[e.from].push_back({e.to, e.target});
    adj[e.to].push_back({e.from, -e.target});
  }
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> queue{0};
  seen[0] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::size_t p = queue[head];
    for (const auto& [q, d] : adj[p]) {
      if (seen[q]) continue;
      seen[q] = 1;
      out.values[q] = out.values[p] + d;
      queue.push_back(q);
    }
  }
  CgOptions cg{opt.tol, std::min<std::size_t>(10 * n, opt.iteration_cap)};
  out.cg = conjugate_gradient(apply, diag, rhs, out.values, cg);
  double mean = 0.0;
  for (double v : out.values) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : out.values) v -= mean;
  return out;
}

}  // namespace detail

/// Per component, argmin_f sum (Dx f - gx)^2 + (Dy f - gy)^2 over forward
/// differences whose two pixels both lie in the component; each component
/// is shifted to zero mean.
inline SparseShading integrate_gradients(const GradientField& grad,
                                         const IntegrationOptions& opt = {}) {
  if (!grad.gx.same_shape(grad.gy) || !grad.gx.same_shape(grad.valid))
    fail_usage("gradient field components differ in shape");
  Labeling lab = connected_components(grad.valid);
  if (lab.count == 0) fail_data("gradient field has no valid pixels to integrate");

  const auto systems = detail::build_component_systems(grad, lab);
  std::vector<detail::ComponentSolution> sols(systems.size());
  parallel_for(static_cast<int>(systems.size()),
               [&](int c) { sols[c] = detail::solve_component(systems[c], opt); }, 1);

  SparseShading out{ScalarField(Grid<double>(grad.width(), grad.height()), grad.valid),
                    std::move(lab), {}};
  out.gauges.resize(systems.size());
  for (std::size_t c = 0; c < systems.size(); ++c) {
    const auto& s = systems[c];
    const auto& sol = sols[c];
    if (!sol.cg.converged)
      throw SolverError("integration of component " + std::to_string(c) +
                            " did not converge",
                        sol.cg.iterations, sol.cg.relative_residual);
    for (std::size_t k = 0; k < s.pixels.size(); ++k)
      out.field.values[s.pixels[k]] = sol.values[k];
    out.gauges[c] = {s.pixels.size(), 0.0, sol.cg.iterations, sol.cg.relative_residual};
  }
  return out;
}

struct BridgeOptions {
  int max_gap = 24;  // longest run of invalid pixels bridged, in pixels
};

struct BridgeReport {
  std::size_t links = 0;   // row/column crossings used
  std::size_t groups = 0;  // independent sets of linked components
};

/// Re-estimates the per-component gauges of a sparse reconstruction by
/// bridging short invalid gaps along rows and columns. Across a gap of
/// length d between valid pixels p and q the value difference is predicted
/// by the trapezoid rule, d * (g(p) + g(q)) / 2. Offsets are the weighted
/// least-squares fit of those predictions; within each group of linked
/// components the largest keeps its gauge.
inline BridgeReport bridge_gauges(SparseShading& sparse, const GradientField& grad,
                                  const BridgeOptions& opt = {}) {
  const int w = sparse.width();
  const int h = sparse.height();
  const int K = sparse.components.count;
  const auto& labels = sparse.components.labels;
  const auto& f = sparse.field.values;

  // (a, b) with a < b -> accumulated weight and weighted (c_b - c_a).
  std::map<std::pair<int, int>, std::pair<double, double>> pairs;
  BridgeReport report;
  auto add_link = [&](std::size_t p, std::size_t q, int d, double gp, double gq) {
    const int a = labels[p];
    const int b = labels[q];
    if (a == b) return;
    const double predicted = d * 0.5 * (gp + gq);
    double diff = f[p] + predicted - f[q];  // estimate of c_b - c_a
    const double weight = 1.0 / d;
    auto key = std::minmax(a, b);
    if (a > b) diff = -diff;
    auto& acc = pairs[{key.first, key.second}];
    acc.first += weight;
    acc.second += weight * diff;
    ++report.links;
  };
  for (int y = 0; y < h; ++y) {
    int last = -1;
    for (int x = 0; x < w; ++x) {
      if (labels(x, y) < 0) continue;
      if (last >= 0 && x - last > 1 && x - last - 1 <= opt.max_gap) {
        const std::size_t p = labels.index(last, y);
        const std::size_t q = labels.index(x, y);
        add_link(p, q, x - last, grad.gx[p], grad.gx[q]);
      }
      last = x;
    }
  }
  for (int x = 0; x < w; ++x) {
    int last = -1;
    for (int y = 0; y < h; ++y) {
      if (labels(x, y) < 0) continue;
      if (last >= 0 && y - last > 1 && y - last - 1 <= opt.max_gap) {
        const std::size_t p = labels.index(x, last);
        const std::size_t q = labels.index(x, y);
        add_link(p, q, y - last, grad.gy[p], grad.gy[q]);
      }
      last = y;
    }
  }

  // Group components linked by at least one crossing.
  std::vector<int> group(K, -1);
  std::vector<std::vector<int>> adj(K);
  for (const auto& [key, acc] : pairs) {
    adj[key.first].push_back(key.second);
    adj[key.second].push_back(key.first);
  }
  std::vector<std::vector<int>> members;
  for (int c = 0; c < K; ++c) {
    if (group[c] >= 0) continue;
    const int g = static_cast<int>(members.size());
    members.emplace_back();
    std::vector<int> stack{c};
    group[c] = g;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      members[g].push_back(u);
      for (int v : adj[u])
        if (group[v] < 0) {
          group[v] = g;
          stack.push_back(v);
        }
    }
  }
  report.groups = members.size();

  std::vector<double> offset(K, 0.0);
  const auto& sizes = sparse.components.sizes;
  for (auto& mem : members) {
    if (mem.size() < 2) continue;
    std::sort(mem.begin(), mem.end());
    int anchor = mem.front();
    for (int c : mem)
      if (sizes[c] > sizes[anchor]) anchor = c;
    // Unknowns: every member except the anchor.
    std::vector<int> slot(K, -1);
    std::vector<int> unknowns;
    for (int c : mem)
      if (c != anchor) {
        slot[c] = static_cast<int>(unknowns.size());
        unknowns.push_back(c);
      }
    const std::size_t n = unknowns.size();
    std::vector<double> diag(n, 0.0), rhs(n, 0.0), x(n, 0.0);
    struct Link {
      int a, b;
      double weight;
    };
    std::vector<Link> links;
    for (const auto& [key, acc] : pairs) {
      if (group[key.first] != group[mem.front()]) continue;
      const auto [a, b] = key;
      const double wgt = acc.first;
      const double mean_diff = acc.second / acc.first;  // c_b - c_a
      // weight * ((c_b - c_a) - mean_diff)^2
      if (slot[a] >= 0) {
        diag[slot[a]] += wgt;
        rhs[slot[a]] -= wgt * mean_diff;
      }
      if (slot[b] >= 0) {
        diag[slot[b]] += wgt;
        rhs[slot[b]] += wgt * mean_diff;
      }
      links.push_back({slot[a], slot[b], wgt});
    }
    auto apply = [&](std::span<const double> in, std::span<double> out) {
      for (std::size_t i = 0; i < n; ++i) out[i] = diag[i] * in[i];
      for (const auto& l : links) {
        if (l.a >= 0 && l.b >= 0) {
          out[l.a] -= l.weight * in[l.b];
          out[l.b] -= l.weight * in[l.a];
        }
      }
    };
    const CgResult res = conjugate_gradient(apply, diag, rhs, x, {1e-12, 20 * n + 100});
    if (!res.converged)
      throw SolverError("gauge bridging did not converge", res.iterations,
                        res.relative_residual);
    for (std::size_t i = 0; i < n; ++i) offset[unknowns[i]] = x[i];
  }

  for (std::size_t i = 0; i < sparse.field.size(); ++i) {
    const int l = labels[i];
    if (l >= 0) sparse.field.values[i] += offset[l];
  }
  for (int c = 0; c < K; ++c) sparse.gauges[c].target += offset[c];
  return report;
}

}  // namespace shadex
