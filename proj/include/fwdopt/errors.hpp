#pragma once

#include <stdexcept>
#include <string>

namespace fwdopt {

/// Invalid model or experiment configuration (bad parameters, unmet preconditions).
class ConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A non-finite intermediate value; the message names the failing term.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an API contract, e.g. passing a portfolio without an admissibility certificate.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// No admissible solution exists for the requested problem.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fwdopt
