#pragma once

#include <stdexcept>
#include <string>

namespace segfair {

// Library-wide error hierarchy. The CLI maps these to exit codes:
// DataError -> 2, NonConvergence (and subclasses) -> 3.

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad parameters to a library call (n > |V|, empty ensemble, ...).
class InvalidArgument : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

// A graph or plan failed one of its structural invariants.
class InvariantViolation : public DataError {
public:
    InvariantViolation(const std::string& what, long long offending_id)
        : DataError(what), offending_id_(offending_id) {}
    long long offending_id() const noexcept { return offending_id_; }

private:
    long long offending_id_;
};

class DisconnectedGraph : public DataError {
public:
    explicit DisconnectedGraph(std::size_t components)
        : DataError("graph is disconnected: " + std::to_string(components) + " components"),
          components_(components) {}
    std::size_t component_count() const noexcept { return components_; }

private:
    std::size_t components_;
};

// D or F requested on a city with Q = 0 or Q = P.
class UndefinedIndex : public DataError {
public:
    using DataError::DataError;
};

class InfeasibleSpec : public DataError {
public:
    using DataError::DataError;
};

class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dissimilarity adjustment ran out of moves or iterations.
class AdjustNonConvergence : public NonConvergence {
public:
    AdjustNonConvergence(const std::string& what, double best_d)
        : NonConvergence(what), best_d_(best_d) {}
    double best_d() const noexcept { return best_d_; }

private:
    double best_d_;
};

// From-scratch seeding exceeded its repetition cap.
class SeedStuck : public NonConvergence {
public:
    using NonConvergence::NonConvergence;
};

// No balanced split found for any district pair within the retry budget.
class ChainStall : public NonConvergence {
public:
    using NonConvergence::NonConvergence;
};

}  // namespace segfair
