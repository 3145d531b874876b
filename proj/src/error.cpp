#include "flatmin/error.hpp"

namespace flatmin {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::evaluation_domain: return "evaluation-domain";
    case ErrorKind::numeric_failure: return "numeric-failure";
    case ErrorKind::degenerate_basis: return "degenerate-basis";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::insufficient_domain: return "insufficient-domain";
    case ErrorKind::unsupported_check: return "unsupported-check";
    case ErrorKind::insufficient_sampling: return "insufficient-sampling";
    case ErrorKind::integration_failure: return "integration-failure";
    case ErrorKind::io: return "io";
    case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace flatmin
