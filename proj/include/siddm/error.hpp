#pragma once

#include <stdexcept>
#include <string>

namespace siddm {

enum class ErrorKind {
  InvalidArgument,
  Shape,
  NonFinite,
  Io,
  Version,
  Format,
  Support,
  Training,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorKind::InvalidArgument, message);
}

}  // namespace siddm
