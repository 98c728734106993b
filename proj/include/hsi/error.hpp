#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hsi {

/// Failure category. Each maps onto a process exit code in the CLI.
enum class ErrorKind {
    io,               ///< unreadable/unwritable file, malformed raster
    config,           ///< invalid configuration or flag value
    numerical,        ///< solver failed to converge, non-finite result
    degenerate,       ///< data carries no usable information
    invalid_argument  ///< API precondition violated
};

inline const char *to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::io: return "io";
        case ErrorKind::config: return "config";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::invalid_argument: return "invalid_argument";
    }
    return "unknown";
}

/// Exception carrying a category and the name of the module that raised it.
/// what() reads "module: message".
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, const std::string &message)
        : std::runtime_error(module + ": " + message), kind_(kind), module_(std::move(module)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string &module() const noexcept { return module_; }

private:
    ErrorKind kind_;
    std::string module_;
};

using WarningHandler = std::function<void(std::string_view module, std::string_view message)>;

namespace detail {
inline std::mutex &warning_mutex() {
    static std::mutex m;
    return m;
}
inline WarningHandler &warning_handler() {
    static WarningHandler handler = [](std::string_view module, std::string_view message) {
        std::cerr << "warning: " << module << ": " << message << '\n';
    };
    return handler;
}
}  // namespace detail

/// Replaces the process-wide warning sink; returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(detail::warning_mutex());
    std::swap(detail::warning_handler(), handler);
    return handler;
}

inline void warn(std::string_view module, std::string_view message) {
    std::lock_guard lock(detail::warning_mutex());
    if (detail::warning_handler()) detail::warning_handler()(module, message);
}

}  // namespace hsi
