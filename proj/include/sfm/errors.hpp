#pragma once

#include <stdexcept>
#include <string>

namespace sfm {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Too few inputs for an estimator (8-point, DLT, ...).
class ArityError : public Error {
  public:
    using Error::Error;
};

/// Input geometry is degenerate (rank-deficient design matrix, zero baseline, ...).
class DegeneracyError : public Error {
  public:
    using Error::Error;
};

/// A 3D point lies on the principal plane of a camera; no finite projection exists.
class PrincipalPlaneError : public Error {
  public:
    using Error::Error;
};

/// Homogeneous solution has a vanishing w component.
class AtInfinityError : public Error {
  public:
    using Error::Error;
};

/// Malformed file content. The message names the offending line/track.
class ParseError : public Error {
  public:
    using Error::Error;
};

/// A record references an entity that does not exist (e.g. unknown frame id).
class ReferentialError : public Error {
  public:
    using Error::Error;
};

/// A caller violated an operation's documented precondition.
class ContractError : public Error {
  public:
    using Error::Error;
};

/// The linear solver failed even at maximum damping.
class SolverError : public Error {
  public:
    using Error::Error;
};

/// Synthetic scene configuration cannot produce a usable scene.
class GenerationError : public Error {
  public:
    using Error::Error;
};

/// End-to-end reconstruction could not produce a result.
class ReconstructionError : public Error {
  public:
    using Error::Error;
};

}  // namespace sfm
