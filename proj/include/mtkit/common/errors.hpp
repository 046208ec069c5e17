#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mtkit {

// Base of every error raised by the toolkit. Callers that only need to
// report a failure can catch this; the subclasses carry structured detail.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class ShortfallError : public Error {
 public:
  ShortfallError(std::size_t requested, std::size_t available)
      : Error("requested " + std::to_string(requested) +
              " messages but only " + std::to_string(available) +
              " are available"),
        requested_(requested),
        available_(available) {}
  std::size_t requested() const noexcept { return requested_; }
  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t requested_;
  std::size_t available_;
};

class InvalidSplit : public Error {
 public:
  using Error::Error;
};

class InfeasibleSplit : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class InvalidPick : public Error {
 public:
  using Error::Error;
};

class ConsentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::size_t bytes_written = 0)
      : Error(what), bytes_written_(bytes_written) {}
  std::size_t bytes_written() const noexcept { return bytes_written_; }

 private:
  std::size_t bytes_written_;
};

class AnalysisError : public Error {
 public:
  AnalysisError(const std::string& what, std::vector<std::string> offenders)
      : Error(what), offenders_(std::move(offenders)) {}
  const std::vector<std::string>& offenders() const noexcept {
    return offenders_;
  }

 private:
  std::vector<std::string> offenders_;
};

}  // namespace mtkit
