#pragma once

// Dense completion of a sparse shading map by minimizing
//   lambda_data * sum_{x observed} (S(x) - S0(x))^2
// + lambda_smooth * sum_{4-neighbours p,q} (S(p) - S(q))^2.

#include <cmath>
#include <vector>

#include "shadex/error.hpp"
#include "shadex/integrate.hpp"
#include "shadex/parallel.hpp"
#include "shadex/raster.hpp"
#include "shadex/solver.hpp"

namespace shadex {

struct CompletionConfig {
  double lambda_data = 1.0;
  double lambda_smooth = 1.0;
  double tol = 1e-8;
  std::size_t max_iter = 50000;

  void validate() const {
    if (!(lambda_data > 0.0)) fail_usage("lambda_data must be positive");
    if (!(lambda_smooth >= 0.0)) fail_usage("lambda_smooth must be non-negative");
    if (!(tol > 0.0 && tol < 1.0)) fail_usage("completion tol must lie in (0, 1)");
    if (max_iter == 0) fail_usage("completion max_iter must be positive");
  }

  friend bool operator==(const CompletionConfig&, const CompletionConfig&) = default;
};

/// Normal equations (lambda_data * M + lambda_smooth * L) S = lambda_data * M S0
/// with M the observation indicator and L the 4-neighbour grid Laplacian.
class CompletionSystem {
 public:
  CompletionSystem(const ScalarField& sparse, const CompletionConfig& cfg)
      : width_(sparse.width()), height_(sparse.height()), cfg_(cfg) {
    cfg.validate();
    const std::size_t n = sparse.size();
    observed_.assign(n, 0);
    diag_.assign(n, 0.0);
    rhs_.assign(n, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!sparse.is_valid(i)) continue;
      if (!std::isfinite(sparse.values[i])) fail_data("observed shading value is not finite");
      observed_[i] = 1;
      diag_[i] += cfg.lambda_data;
      rhs_[i] = cfg.lambda_data * sparse.values[i];
      ++count;
    }
    if (count == 0) fail_data("completion needs at least one observed pixel");
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        diag_[index(x, y)] += cfg.lambda_smooth * degree(x, y);
  }

  std::size_t size() const noexcept { return diag_.size(); }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const double> diagonal() const noexcept { return diag_; }
  std::span<const double> rhs() const noexcept { return rhs_; }
  bool observed(std::size_t i) const noexcept { return observed_[i] != 0; }

  /// out = A in, matrix-free.
  void apply(std::span<const double> in, std::span<double> out) const {
    const double ls = cfg_.lambda_smooth;
    parallel_for(height_, [&](int y) {
      for (int x = 0; x < width_; ++x) {
        const std::size_t i = index(x, y);
        double acc = diag_[i] * in[i];
        if (x > 0) acc -= ls * in[i - 1];
        if (x + 1 < width_) acc -= ls * in[i + 1];
        if (y > 0) acc -= ls * in[i - width_];
        if (y + 1 < height_) acc -= ls * in[i + width_];
        out[i] = acc;
      }
    }, 64);
  }

  /// Explicit row-major matrix; intended for small grids and tests.
  std::vector<double> dense() const {
    const std::size_t n = size();
    std::vector<double> a(n * n, 0.0);
    const double ls = cfg_.lambda_smooth;
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        const std::size_t i = index(x, y);
        a[i * n + i] = diag_[i];
        if (x > 0) a[i * n + i - 1] = -ls;
        if (x + 1 < width_) a[i * n + i + 1] = -ls;
        if (y > 0) a[i * n + i - width_] = -ls;
        if (y + 1 < height_) a[i * n + i + width_] = -ls;
      }
    }
    return a;
  }

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }
  int degree(int x, int y) const noexcept {
    return (x > 0) + (x + 1 < width_) + (y > 0) + (y + 1 < height_);
  }

  int width_;
  int height_;
  CompletionConfig cfg_;
  std::vector<std::uint8_t> observed_;
  std::vector<double> diag_;
  std::vector<double> rhs_;
};

inline CompletionSystem assemble_system(const ScalarField& sparse, const CompletionConfig& cfg) {
  return CompletionSystem(sparse, cfg);
}
inline CompletionSystem assemble_system(const SparseShading& sparse, const CompletionConfig& cfg) {
  return CompletionSystem(sparse.field, cfg);
}

struct CompletionResult {
  ScalarField shading;  // dense
  CgResult cg;
};

inline CompletionResult complete_shading_with_stats(const ScalarField& sparse,
                                                    const CompletionConfig& cfg = {}) {
  const CompletionSystem sys(sparse, cfg);
  double mean = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < sys.size(); ++i)
    if (sys.observed(i)) {
      mean += sparse.values[i];
      ++count;
    }
  mean /= static_cast<double>(count);
  std::vector<double> x(sys.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = sys.observed(i) ? sparse.values[i] : mean;

  auto apply = [&](std::span<const double> in, std::span<double> out) { sys.apply(in, out); };
  const CgResult res = conjugate_gradient(apply, sys.diagonal(), sys.rhs(), x,
                                          {cfg.tol, cfg.max_iter});
  if (!res.converged)
    throw SolverError("shading completion did not converge", res.iterations,
                      res.relative_residual);
  return {ScalarField(Grid<double>(sys.width(), sys.height(), std::move(x))), res};
}

inline ScalarField complete_shading(const ScalarField& sparse, const CompletionConfig& cfg = {}) {
  return complete_shading_with_stats(sparse, cfg).shading;
}
inline ScalarField complete_shading(const SparseShading& sparse, const CompletionConfig& cfg = {}) {
  return complete_shading(sparse.field, cfg);
}

/// Value of the weighted two-term objective for a dense candidate.
inline double completion_energy(const Grid<double>& s, const ScalarField& sparse,
                                const CompletionConfig& cfg) {
  double data = 0.0;
  double smooth = 0.0;
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      const std::size_t i = s.index(x, y);
      if (sparse.is_valid(i)) {
        const double d = s[i] - sparse.values[i];
        data += d * d;
      }
      if (x + 1 < s.width()) {
        const double d = s[i] - s[i + 1];
        smooth += d * d;
      }
      if (y + 1 < s.height()) {
        const double d = s[i] - s(x, y + 1);
        smooth += d * d;
      }
    }
  }
  return cfg.lambda_data * data + cfg.lambda_smooth * smooth;
}

}  // namespace shadex
