#pragma once

#include <stdexcept>
#include <string>

namespace saflab {

// Error categories surfaced by the CLI as machine-readable failure classes.
enum class ErrorCategory {
    usage,      // bad command line / config
    input,      // semantically invalid value (label out of range, bad BER, ...)
    format,     // malformed file contents (magic, truncation, version)
    io,         // filesystem failure
    dimension,  // tensor shape mismatch
};

inline const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::usage: return "usage";
        case ErrorCategory::input: return "input";
        case ErrorCategory::format: return "format";
        case ErrorCategory::io: return "io";
        case ErrorCategory::dimension: return "dimension";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
    throw Error(category, message);
}

inline void require(bool condition, ErrorCategory category, const std::string& message) {
    if (!condition) fail(category, message);
}

}  // namespace saflab
