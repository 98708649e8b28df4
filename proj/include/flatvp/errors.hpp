#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace flatvp {

/// Invalid argument or precondition violation supplied by the caller.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function (e.g. modulus >= 1).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An iterative or adaptive procedure failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    ConvergenceError(const std::string& what, std::vector<double> history_)
        : std::runtime_error(what), history(std::move(history_)) {}
    std::vector<double> history;   ///< residual per iteration, when the procedure keeps one
};

/// A Casimir model whose definition is inconsistent (e.g. non-monotone Q').
class ModelDefinitionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The computed state reaches the outer edge of the radial grid.
class GridTooSmallError : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

/// Non-finite particle coordinate after an integration step.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, std::size_t index_)
        : std::runtime_error(what), index(index_) {}
    std::size_t index;
};

}  // namespace flatvp
