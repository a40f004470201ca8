#pragma once

#include <stdexcept>
#include <string>

namespace qladder {

/// Parameter or input outside the model's admissible domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An operation was called outside its stated preconditions
/// (wrong spillover regime, no-black-hole assumption violated, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical result contradicts a structural property of the model,
/// e.g. more than two equilibria on (1/2, 1] in the linear regime.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// lambda*(z) evaluated exactly on its vertical asymptote.
class PoleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace qladder
