#pragma once

#include <stdexcept>
#include <string>

namespace swips {

enum class ErrorKind { validation, domain, halted, nontermination, quadrature, singular };

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::validation: return "VALIDATION";
    case ErrorKind::domain: return "DOMAIN";
    case ErrorKind::halted: return "HALTED";
    case ErrorKind::nontermination: return "NONTERMINATION";
    case ErrorKind::quadrature: return "QUADRATURE";
    case ErrorKind::singular: return "SINGULAR";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace swips
