// Copyright The pnfc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pnfc {

/// Coarse error families. The CLI maps each family onto its own exit code.
enum class ErrorFamily { parse, numeric_precondition, tolerance };

class Error : public std::runtime_error {
public:
  Error(ErrorFamily family, const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what), family_(family), module_(module) {}

  ErrorFamily family() const noexcept { return family_; }
  const std::string& module() const noexcept { return module_; }

private:
  ErrorFamily family_;
  std::string module_;
};

#define PNFC_DEFINE_ERROR(Name, Family)                                  \
  class Name : public Error {                                            \
  public:                                                                \
    Name(const std::string& module, const std::string& what)             \
        : Error(ErrorFamily::Family, module, what) {}                    \
  }

PNFC_DEFINE_ERROR(ParseError, parse);
PNFC_DEFINE_ERROR(DimensionError, numeric_precondition);
PNFC_DEFINE_ERROR(DimensionCapError, numeric_precondition);
PNFC_DEFINE_ERROR(NearSingularError, numeric_precondition);
PNFC_DEFINE_ERROR(ContourTooCloseError, numeric_precondition);
PNFC_DEFINE_ERROR(ConvergenceError, numeric_precondition);
PNFC_DEFINE_ERROR(DomainError, numeric_precondition);
PNFC_DEFINE_ERROR(ClusterSeparationError, numeric_precondition);
PNFC_DEFINE_ERROR(CostGuardError, numeric_precondition);
PNFC_DEFINE_ERROR(PreconditionError, numeric_precondition);
PNFC_DEFINE_ERROR(IdempotenceError, tolerance);
PNFC_DEFINE_ERROR(QuadratureError, tolerance);
PNFC_DEFINE_ERROR(TailBoundError, tolerance);
PNFC_DEFINE_ERROR(ToleranceError, tolerance);

#undef PNFC_DEFINE_ERROR

}  // namespace pnfc
