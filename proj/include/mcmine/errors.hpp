#pragma once

#include <stdexcept>
#include <string>

namespace mcmine {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violated a structural contract (bad config, bad file).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Model output did not follow the tagged output grammar.
class ParseError : public Error {
 public:
  using Error::Error;
};

class MissingBinding : public Error {
 public:
  explicit MissingBinding(std::string name)
      : Error("missing template binding: " + name), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class MalformedScenario : public Error {
 public:
  using Error::Error;
};

// Gateway failures. Only TransportError and RateLimited are retried.
class GatewayError : public Error {
 public:
  using Error::Error;
};

class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class RateLimited : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class Unauthorized : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class ProviderRefusal : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class InsufficientProblems : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

}  // namespace mcmine
