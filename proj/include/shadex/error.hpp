#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shadex {

enum class ErrorKind {
  usage,   // bad arguments or configuration
  data,    // unreadable, malformed or degenerate input
  solver,  // iterative solve did not reach tolerance
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::size_t iterations, double residual)
      : Error(ErrorKind::solver, what + " (iterations " +
                                     std::to_string(iterations) +
                                     ", relative residual " +
                                     std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) {
  throw Error(ErrorKind::usage, msg);
}

[[noreturn]] inline void fail_data(const std::string& msg) {
  throw Error(ErrorKind::data, msg);
}

}  // namespace shadex
