#pragma once

#include <stdexcept>
#include <string>

namespace porogen {

/// Failure categories surfaced by the library; the CLI maps them to exit codes.
enum class ErrorKind {
    invalid_input,  // precondition violated by the caller
    infeasible,     // no construction exists within the retry budget
    numeric,        // solver did not converge / training diverged
    backend,        // external solver missing or misbehaving
    internal,       // verifier rejected a result; indicates a bug
    io,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::backend: return "backend";
    case ErrorKind::internal: return "internal";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorKind::invalid_input, what);
}

} // namespace porogen
