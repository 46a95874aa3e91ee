#pragma once

#include <stdexcept>
#include <string>

namespace loopflow {

/// Frequency-response evaluation hit an imaginary-axis pole: the grid must
/// avoid frequencies where a denominator magnitude falls below the floor.
class PoleOnGrid : public std::runtime_error {
   public:
    explicit PoleOnGrid(double omega)
        : std::runtime_error("denominator magnitude below floor at omega = " + std::to_string(omega)),
          omega_(omega) {}
    double omega() const { return omega_; }

   private:
    double omega_;
};

class NotConverged : public std::runtime_error {
   public:
    NotConverged(long sweeps, double residual)
        : std::runtime_error("iterative solve did not reach tolerance after " + std::to_string(sweeps) +
                             " sweeps (residual " + std::to_string(residual) + ")"),
          sweeps_(sweeps),
          residual_(residual) {}
    long   sweeps() const { return sweeps_; }
    double residual() const { return residual_; }

   private:
    long   sweeps_;
    double residual_;
};

class OutOfBounds : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class InvalidSector : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class ImproperTransferFunction : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class NonFiniteState : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Unsolvable direct-feedthrough loop in a closed-loop simulation.
class AlgebraicLoop : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Config document violates the schema; `path()` names the offending key.
class SchemaError : public std::runtime_error {
   public:
    SchemaError(const std::string& path, const std::string& what)
        : std::runtime_error("config error at '" + path + "': " + what), path_(path) {}
    const std::string& path() const { return path_; }

   private:
    std::string path_;
};

class FileNotFound : public std::runtime_error {
   public:
    explicit FileNotFound(const std::string& path)
        : std::runtime_error("file not found: " + path) {}
};

}  // namespace loopflow
