#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace heatinv {

/// Coarse failure classes. The CLI maps each one to a stable exit code and a
/// machine-readable name, so keep the list short and append-only.
enum class ErrorCategory {
    InvalidArgument,   // precondition on a parameter violated
    DomainViolation,   // point or field outside its admissible set
    NumericalFailure,  // factorization / solve / residual failure
    Io,                // missing or unreadable file
    Schema,            // file readable but malformed
};

std::string_view category_name(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) { throw Error(c, what); }

inline void require(bool ok, ErrorCategory c, const std::string& what) {
    if (!ok) fail(c, what);
}

}  // namespace heatinv
