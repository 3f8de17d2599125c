#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace fraqmap {

inline constexpr double pi = std::numbers::pi;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: malformed files, violated preconditions, bad parameters.
class InputError : public Error {
public:
  using Error::Error;
};

/// A numerical procedure did not reach its target (linear solve, fixed point, eigen-solve).
class SolverError : public Error {
public:
  using Error::Error;
};

namespace detail {

template <class... Args>
std::string concat(Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  return os.str();
}

} // namespace detail

template <class E = InputError, class... Args>
[[noreturn]] void raise(Args&&... args) {
  throw E(detail::concat(std::forward<Args>(args)...));
}

template <class E = InputError, class... Args>
void require(bool cond, Args&&... args) {
  if (!cond) raise<E>(std::forward<Args>(args)...);
}

using Point = Eigen::Vector2d;

} // namespace fraqmap
