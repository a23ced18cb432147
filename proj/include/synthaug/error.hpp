// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace synthaug {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input data, configuration or manifest. Detected before work starts
/// wherever possible.
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A teacher completion that does not follow the tag grammar. Signals that
/// the job should be resampled.
class MalformedCompletion : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

/// Transient failures persisted past the retry budget.
class BackendUnavailable : public BackendError {
public:
    using BackendError::BackendError;
};

/// Non-retryable rejection; the message carries the server's explanation.
class BackendRejected : public BackendError {
public:
    BackendRejected(int status, const std::string& message)
        : BackendError("backend rejected request (HTTP " + std::to_string(status) + "): " + message),
          status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

class LookupMiss : public BackendError {
public:
    using BackendError::BackendError;
};

class TrainerError : public Error {
public:
    using Error::Error;
};

class TrainerFailed : public TrainerError {
public:
    TrainerFailed(int exit_code, std::string captured_stderr)
        : TrainerError("trainer exited with status " + std::to_string(exit_code) + ": " + captured_stderr),
          exit_code_(exit_code),
          stderr_(std::move(captured_stderr)) {}

    int exit_code() const noexcept { return exit_code_; }
    const std::string& captured_stderr() const noexcept { return stderr_; }

private:
    int exit_code_;
    std::string stderr_;
};

class TrainerTimeout : public TrainerError {
public:
    using TrainerError::TrainerError;
};

/// metrics.json (or a report file) does not match the report schema.
class MetricsSchemaError : public TrainerError {
public:
    explicit MetricsSchemaError(std::string field)
        : TrainerError("metrics schema violation: missing or invalid field '" + field + "'"),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace synthaug
