#pragma once

// Matrix-free Jacobi-preconditioned conjugate gradient, shared by the
// integration and completion solves. Reductions run in index order so a
// solve is bit-reproducible.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace shadex {

struct CgOptions {
  double tol = 1e-8;  // relative residual ||b - Ax|| / ||b||
  std::size_t max_iter = 50000;
};

struct CgResult {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace detail

/// Solves A x = b for symmetric positive (semi)definite A given as
/// `apply(in, out)` (out = A in) and its diagonal. `x` holds the initial
/// guess on entry.
template <typename Apply>
CgResult conjugate_gradient(Apply&& apply, std::span<const double> diag,
                            std::span<const double> b, std::span<double> x,
                            const CgOptions& opt) {
  const std::size_t n = b.size();
  CgResult res;
  const double bnorm = std::sqrt(detail::dot(b, b));
  if (bnorm == 0.0) {
    for (double& v : x) v = 0.0;
    res.converged = true;
    return res;
  }
  std::vector<double> r(n), z(n), p(n), ap(n);
  apply(std::span<const double>(x.data(), n), std::span<double>(ap));
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  auto precondition = [&] {
    for (std::size_t i = 0; i < n; ++i) z[i] = diag[i] > 0.0 ? r[i] / diag[i] : r[i];
  };
  double rnorm = std::sqrt(detail::dot(r, r));
  res.relative_residual = rnorm / bnorm;
  if (res.relative_residual <= opt.tol) {
    res.converged = true;
    return res;
  }
  precondition();
  p = z;
  double rz = detail::dot(r, z);
  while (res.iterations < opt.max_iter) {
    apply(std::span<const double>(p), std::span<double>(ap));
    const double pap = detail::dot(p, ap);
    if (!(pap > 0.0)) break;  // breakdown: direction in the null space
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    ++res.iterations;
    rnorm = std::sqrt(detail::dot(r, r));
    res.relative_residual = rnorm / bnorm;
    if (res.relative_residual <= opt.tol) {
      res.converged = true;
      break;
    }
    precondition();
    const double rz_next = detail::dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

}  // namespace shadex
