#pragma once

#include <stdexcept>
#include <string>

namespace semgeom {

// Broad failure classes; each maps to a distinct CLI exit code.
enum class ErrorKind { config, data, transport, numerical, leakage };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Short machine-readable tag, e.g. "TRUNCATED", "ZERO_VARIANCE".
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

int exit_code_for(ErrorKind kind) noexcept;

}  // namespace semgeom
