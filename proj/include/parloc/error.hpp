#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace parloc {

enum class ErrorKind {
  kIo,
  kParse,
  kIntegrity,
  kDimension,
  kConfig,
  kInvalidArgument,
  kGeometry,
};

/// Single exception type for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require_same_dim(std::size_t a, std::size_t b, std::string_view where) {
  if (a != b) {
    fail(ErrorKind::kDimension, std::string(where) + ": dimension mismatch (" +
                                    std::to_string(a) + " vs " +
                                    std::to_string(b) + ")");
  }
}

}  // namespace parloc
