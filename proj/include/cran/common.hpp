#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cran {

using cxd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

constexpr double kLn2 = 0.6931471805599453094;

// Eigenvalue floor for positive-definiteness checks, relative to
// max(1, spectral norm).
constexpr double kPdTolFactor = 1e-10;

// Quantization-noise eigenvalue cap, relative to max(1, signal spectral
// norm).  Represents "discard this dimension" finitely; chosen large enough
// that the residual rate through a capped dimension stays below the 1e-6
// feasibility tolerance.
constexpr double kOmegaCapFactor = 1e7;

struct SingularMatrixError : std::runtime_error {
  explicit SingularMatrixError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct LookupError : std::runtime_error {
  explicit LookupError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SequencingError : std::runtime_error {
  explicit SequencingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnsupportedInputError : std::runtime_error {
  explicit UnsupportedInputError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cran
