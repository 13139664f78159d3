#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace adko {

/// Exception with a stable machine-readable kind string alongside the
/// human-readable message. Kinds are used by the CLI to produce precise
/// exit diagnostics and by tests to assert on failure categories.
class Error : public std::runtime_error {
public:
    Error(std::string kind, std::string message)
        : std::runtime_error(kind + ": " + message),
          kind_(std::move(kind)),
          message_(std::move(message)) {}

    const std::string& kind() const noexcept { return kind_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string kind_;
    std::string message_;
};

inline void require(bool ok, const char* kind, const std::string& message) {
    if (!ok) throw Error(kind, message);
}

}  // namespace adko
