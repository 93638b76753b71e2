#pragma once

#include <stdexcept>
#include <string>

namespace batchbandit {

enum class ErrorKind {
    invalid_input,
    invalid_config,
    uninformed,
    insufficient_data,
    replay_coverage,
    io,
};

const char* to_string(ErrorKind kind) noexcept;

// Every recoverable failure in the library is reported as an Error carrying
// its kind, so callers (the CLI in particular) can map it to an exit code.
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

}  // namespace batchbandit
