#pragma once

#include <stdexcept>
#include <string>

namespace dcirc {

// Error taxonomy mirrors the CLI exit codes: parse/validation problems map
// to 1, impossible or infeasible queries to 2, size-cap refusals to 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct AddressError : Error { using Error::Error; };
struct NumericDomainError : Error { using Error::Error; };
struct EvidenceImpossibleError : Error { using Error::Error; };
struct InfeasibleDecisionError : Error { using Error::Error; };
struct SizeCapError : Error { using Error::Error; };

}  // namespace dcirc
