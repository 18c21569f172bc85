#pragma once

#include <stdexcept>
#include <string>

namespace mvmt {

enum class ErrorKind {
    Dimension,
    Domain,
    Vocabulary,
    Parse,
    Spec,
    Config,
    State,
    Stratification,
    Divergence,
    DegenerateVector,
    DegenerateRecord,
    TaskKind,
    Lookup,
    Compatibility,
    UndefinedMetric,
    Ordering,
    Evaluation,
    Io,
};

/// Slug used in CLI error lines, e.g. "dimension-error".
const char* error_kind_slug(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_slug(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace mvmt
