#pragma once

#include <stdexcept>
#include <string>

namespace flatmin {

enum class ErrorKind {
    evaluation_domain,
    numeric_failure,
    degenerate_basis,
    invalid_parameter,
    insufficient_domain,
    unsupported_check,
    insufficient_sampling,
    integration_failure,
    io,
    usage,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace flatmin
