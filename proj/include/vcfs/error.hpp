#pragma once

#include <stdexcept>
#include <string>

namespace vcfs {

// Error categories double as CLI exit codes.
enum class ErrorKind : int { usage = 1, data = 2, numerical = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidConfiguration : Error {
  explicit InvalidConfiguration(const std::string& w) : Error(ErrorKind::usage, w) {}
};

struct MissingCovariate : Error {
  explicit MissingCovariate(const std::string& w) : Error(ErrorKind::usage, w) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct OverParameterized : Error {
  explicit OverParameterized(const std::string& w) : Error(ErrorKind::numerical, w) {}
};

struct SingularDesign : Error {
  explicit SingularDesign(const std::string& w) : Error(ErrorKind::numerical, w) {}
};

struct NumericalUnderflow : Error {
  explicit NumericalUnderflow(const std::string& w) : Error(ErrorKind::numerical, w) {}
};

struct NoCandidate : Error {
  explicit NoCandidate(const std::string& w) : Error(ErrorKind::numerical, w) {}
};

}  // namespace vcfs
