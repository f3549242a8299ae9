#ifndef HMG_ERROR_HPP
#define HMG_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hmg {

// Error categories; the C API and CLI map these onto status/exit codes.
enum class ErrorCode {
  invalid_argument = 1,
  no_convergence = 2,
  artifact_mismatch = 3,
  check_failed = 4,
  unsupported = 5,
  runtime = 6,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

[[noreturn]] inline void fail_invalid(const std::string& what) { fail(ErrorCode::invalid_argument, what); }
[[noreturn]] inline void fail_unsupported(const std::string& what) { fail(ErrorCode::unsupported, what); }

} // namespace hmg

#endif
