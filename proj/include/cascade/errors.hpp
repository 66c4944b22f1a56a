#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky factorization failed even after one diagonal jitter attempt.
class NotPositiveDefinite : public Error {
public:
    explicit NotPositiveDefinite(const std::string& what) : Error("not positive definite: " + what) {}
};

/// A matrix that must be inverted (via factorization) is singular.
class SingularConditioning : public Error {
public:
    explicit SingularConditioning(const std::string& what) : Error("singular conditioning: " + what) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what) : Error("dimension mismatch: " + what) {}
};

/// An iterative routine (geodesic mean) did not reach its tolerance.
class NoConvergence : public Error {
public:
    explicit NoConvergence(const std::string& what) : Error("no convergence: " + what) {}
};

/// Invalid configuration (bad file, unknown key, out-of-range value).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

}  // namespace cascade
