#pragma once

#include <stdexcept>
#include <string>

namespace condtest {

// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A conditioning set or a distribution does not fit the oracle's domain:
// out-of-range indices, empty sets, length mismatches.
struct DomainMismatchError : Error {
  using Error::Error;
};

// A documented precondition of an algorithm was violated by the inputs.
// Raised eagerly instead of silently rejecting.
struct PreconditionError : Error {
  using Error::Error;
};

// Restriction of a distribution to a set that carries zero probability.
struct ZeroMassError : Error {
  using Error::Error;
};

// A persistent sampler session was asked for more runs than it was sized for.
struct SessionExhaustedError : Error {
  using Error::Error;
};

// The string-reduction sampler exhausted its query budget mid-emission.
// Deliberately distinct from a Reject verdict.
struct ReductionFailedError : Error {
  using Error::Error;
};

}  // namespace condtest
