// Error type shared by all slogen modules. Every failure carries a category
// so the CLI can emit a single machine-parsable line on stderr.
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slogen {

enum class ErrorCategory {
    config,    // bad or unknown configuration keys/values
    parse,     // malformed input file content
    io,        // file open/read/write failures
    data,      // semantically invalid data (duplicate ids, missing generations, ...)
    model,     // invalid model configuration or shape violations
    training,  // divergence, non-finite losses/gradients
    eval,      // metric preconditions (zero vectors, missing texts, ...)
    internal,  // invariant broken inside the library
};

inline std::string_view to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::parse: return "parse";
        case ErrorCategory::io: return "io";
        case ErrorCategory::data: return "data";
        case ErrorCategory::model: return "model";
        case ErrorCategory::training: return "training";
        case ErrorCategory::eval: return "eval";
        case ErrorCategory::internal: return "internal";
    }
    return "internal";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
    throw Error(category, message);
}

} // namespace slogen
