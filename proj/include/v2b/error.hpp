#ifndef V2B_ERROR_HPP
#define V2B_ERROR_HPP

#include <stdexcept>
#include <string>

namespace v2b {

/** \brief Base of every error raised by the library. */
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define V2B_DEFINE_ERROR(Name)                  \
  class Name : public Error {                   \
   public:                                      \
    explicit Name(const std::string& what)      \
        : Error(std::string(#Name ": ") + what) {} \
  };

V2B_DEFINE_ERROR(DimensionMismatch)
V2B_DEFINE_ERROR(EmptyBillingPeriod)
V2B_DEFINE_ERROR(DomainError)
V2B_DEFINE_ERROR(MalformedModel)
V2B_DEFINE_ERROR(InfeasibleState)
V2B_DEFINE_ERROR(NoChargerAvailable)
V2B_DEFINE_ERROR(BudgetViolation)
V2B_DEFINE_ERROR(ConfigError)
V2B_DEFINE_ERROR(FormatError)
V2B_DEFINE_ERROR(SolverLimit)
V2B_DEFINE_ERROR(ConflictError)

#undef V2B_DEFINE_ERROR

}  // namespace v2b

#endif
