#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace operon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Error hierarchy shared by all modules. Callers that can recover catch the
// specific type; the CLI maps them onto stable exit codes.
struct DimensionMismatch : std::invalid_argument {
  explicit DimensionMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct NotPositiveDefinite : std::runtime_error {
  explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

struct AllocationLimit : std::runtime_error {
  explicit AllocationLimit(const std::string& what) : std::runtime_error(what) {}
};

struct UnsupportedFamily : std::invalid_argument {
  explicit UnsupportedFamily(const std::string& what) : std::invalid_argument(what) {}
};

struct StepOutsideDomain : std::invalid_argument {
  explicit StepOutsideDomain(const std::string& what) : std::invalid_argument(what) {}
};

struct UnstableStep : std::runtime_error {
  explicit UnstableStep(const std::string& what) : std::runtime_error(what) {}
};

struct SolverSingular : std::runtime_error {
  explicit SolverSingular(const std::string& what) : std::runtime_error(what) {}
};

struct CorruptManifest : std::runtime_error {
  explicit CorruptManifest(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct UnsupportedVersion : std::runtime_error {
  explicit UnsupportedVersion(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace operon
