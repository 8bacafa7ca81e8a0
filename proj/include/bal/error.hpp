#pragma once

#include <stdexcept>
#include <string>

namespace bal {

// Error categories. Exit codes for the CLI: config -> 2, data/format/shape/state -> 3,
// numeric/training -> 4.
enum class ErrorKind { config, data, shape, state, numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    int exit_code() const noexcept {
        switch (kind_) {
        case ErrorKind::config:  return 2;
        case ErrorKind::numeric: return 4;
        default:                 return 3;
        }
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& msg)  { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void fail_data(const std::string& msg)    { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void fail_shape(const std::string& msg)   { throw Error(ErrorKind::shape, msg); }
[[noreturn]] inline void fail_state(const std::string& msg)   { throw Error(ErrorKind::state, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }

} // namespace bal
