#pragma once

#include <stdexcept>
#include <string>

namespace shopsim {

// Base for every error the engine raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

class UnknownCategoryError : public CatalogError {
 public:
  using CatalogError::CatalogError;
};

class ShortageError : public CatalogError {
 public:
  using CatalogError::CatalogError;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

// Raised by a backend when it cannot produce a completion.
class BackendError : public Error {
 public:
  using Error::Error;
};

class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

class RequestError : public BackendError {
 public:
  RequestError(int status, const std::string& what) : BackendError(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class ScriptExhaustedError : public BackendError {
 public:
  using BackendError::BackendError;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

class CancelledError : public Error {
 public:
  using Error::Error;
};

class TraceError : public Error {
 public:
  using Error::Error;
};

class DuplicateRunError : public TraceError {
 public:
  using TraceError::TraceError;
};

class PricingError : public Error {
 public:
  using Error::Error;
};

class AnalysisError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class InsufficientDataError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class ProbeError : public Error {
 public:
  using Error::Error;
};

class DegenerateLabelError : public ProbeError {
 public:
  using ProbeError::ProbeError;
};

}  // namespace shopsim
