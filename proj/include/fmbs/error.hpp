#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fmbs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeshError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class LinalgError : public Error {
 public:
  using Error::Error;
};

/// Raised when 1 + mu_i * nu_j vanishes for a pair of eigenvalues.
class IllPosedStein : public LinalgError {
 public:
  IllPosedStein(double product_re, double product_im)
      : LinalgError("ill-posed Stein equation: eigenvalue product " +
                    std::to_string(product_re) +
                    (product_im != 0.0 ? " + " + std::to_string(product_im) + "i" : std::string()) +
                    " is -1"),
        product_re_(product_re),
        product_im_(product_im) {}

  double product_real() const { return product_re_; }
  double product_imag() const { return product_im_; }

 private:
  double product_re_;
  double product_im_;
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::int64_t iteration)
      : Error("divergence detected at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

}  // namespace fmbs
