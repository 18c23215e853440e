#pragma once

#include <stdexcept>
#include <string>

namespace dss {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
    ok = 0,
    config_error = 2,
    data_error = 3,
    numerical_failure = 4,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Bad or missing configuration, unusable paths, invalid parameter ranges.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ExitCode::config_error, what) {}
};

/// Malformed or inconsistent input data.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::data_error, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ExitCode::numerical_failure, what) {}
};

}  // namespace dss
