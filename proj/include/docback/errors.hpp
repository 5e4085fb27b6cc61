#pragma once

#include <stdexcept>
#include <string>

namespace docback {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input files, schema violations, inconsistent configuration.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// Text-provider failures (network, HTTP status, malformed responses).
/// Carries the provider id so callers can report which backend failed.
class ProviderError : public Error {
public:
    ProviderError(std::string provider_id, const std::string& msg)
        : Error("provider '" + provider_id + "': " + msg),
          provider_id_(std::move(provider_id)) {}

    const std::string& provider_id() const { return provider_id_; }

private:
    std::string provider_id_;
};

}  // namespace docback
