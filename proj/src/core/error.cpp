#include "siddm/error.hpp"

namespace siddm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Shape: return "shape mismatch";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Version: return "version mismatch";
    case ErrorKind::Format: return "malformed input";
    case ErrorKind::Support: return "support violation";
    case ErrorKind::Training: return "training aborted";
  }
  return "unknown error";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace siddm
