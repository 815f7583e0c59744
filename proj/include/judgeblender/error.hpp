#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace judgeblender {

// Coarse failure classes. They map one-to-one onto the C API status codes
// and, from there, onto CLI exit codes.
enum class ErrorKind {
  kUsage,     // bad arguments or configuration
  kData,      // malformed or inconsistent input data
  kIo,        // file system failure
  kProvider,  // backend failure after retries
  kCache,     // response cache I/O failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kUsage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

// A parse failure tied to a 1-based line of the input.
class ParseError : public DataError {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message)
      : DataError(source + ":" + std::to_string(line) + ": " + message),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

enum class ProviderFailure {
  kNetwork,    // transport error, 5xx or 429 after all attempts
  kAuth,       // 401/403 or missing credential; never retried
  kMalformed,  // response body is not a chat completion
  kHttp,       // other non-retryable HTTP status
};

class ProviderError : public Error {
 public:
  ProviderError(ProviderFailure failure, const std::string& what,
                std::vector<std::string> causes = {}, int attempts = 1)
      : Error(ErrorKind::kProvider, what),
        failure_(failure),
        causes_(std::move(causes)),
        attempts_(attempts) {}

  ProviderFailure failure() const noexcept { return failure_; }
  // One entry per failed attempt, oldest first.
  const std::vector<std::string>& causes() const noexcept { return causes_; }
  int attempts() const noexcept { return attempts_; }

 private:
  ProviderFailure failure_;
  std::vector<std::string> causes_;
  int attempts_;
};

class CacheError : public Error {
 public:
  explicit CacheError(const std::string& what) : Error(ErrorKind::kCache, what) {}
};

}  // namespace judgeblender
