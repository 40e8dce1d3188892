#pragma once

#include <stdexcept>
#include <string>

namespace fedaq {

// Thrown when an arithmetic result or input is NaN/Inf.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on malformed serialized payloads and files.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an operation would violate an object's state invariants,
// e.g. appending a ledger entry with a regressed round index.
class InvalidStateError : public std::logic_error {
public:
    explicit InvalidStateError(const std::string& what) : std::logic_error(what) {}
};

// Thrown when no integer bit assignment satisfies an energy budget.
class InfeasibleBudgetError : public std::runtime_error {
public:
    explicit InfeasibleBudgetError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedaq
