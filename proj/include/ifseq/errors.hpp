#pragma once

#include <stdexcept>
#include <string>

namespace ifseq {

// Base of every error raised by the library. Solver failures, which carry a
// partial solution, live in equilibrium_solver.hpp.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// IFS validation.
class InvalidIfs : public Error {
public:
    using Error::Error;
};

class TooFewMaps : public InvalidIfs {
public:
    using InvalidIfs::InvalidIfs;
};

class NotContractive : public InvalidIfs {
public:
    using InvalidIfs::InvalidIfs;
};

class DuplicateFixedPoints : public InvalidIfs {
public:
    using InvalidIfs::InvalidIfs;
};

class OverlappingImages : public InvalidIfs {
public:
    using InvalidIfs::InvalidIfs;
};

class GenerationTooLarge : public Error {
public:
    using Error::Error;
};

class DegenerateInterval : public Error {
public:
    using Error::Error;
};

class InvalidVariables : public Error {
public:
    using Error::Error;
};

// A quadrature node (or evaluation point) landed on a root or endpoint of
// the kernel.
class ExactNodeCollision : public Error {
public:
    using Error::Error;
};

class OutOfHull : public Error {
public:
    using Error::Error;
};

class PersistentCollision : public Error {
public:
    using Error::Error;
};

// Exponential fitting.
class FitError : public Error {
public:
    using Error::Error;
};

class NonMonotoneInput : public FitError {
public:
    using FitError::FitError;
};

class NonDecayingInput : public FitError {
public:
    using FitError::FitError;
};

} // namespace ifseq
