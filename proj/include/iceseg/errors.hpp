#pragma once

#include <stdexcept>
#include <string>

namespace iceseg {

/// Input data violates a documented invariant (bad counts, unknown ids, parse failures).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine could not proceed (non-finite likelihood, failed factorization).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad command-line usage or configuration.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace iceseg
