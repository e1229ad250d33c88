#include "heatinv/error.hpp"

namespace heatinv {

std::string_view category_name(ErrorCategory c) noexcept {
    switch (c) {
        case ErrorCategory::InvalidArgument: return "invalid_argument";
        case ErrorCategory::DomainViolation: return "domain_violation";
        case ErrorCategory::NumericalFailure: return "numerical_failure";
        case ErrorCategory::Io: return "io";
        case ErrorCategory::Schema: return "schema";
    }
    return "unknown";
}

}  // namespace heatinv
