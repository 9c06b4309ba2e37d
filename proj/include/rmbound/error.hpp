#pragma once

#include <stdexcept>
#include <string>

namespace rmb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

#define RMB_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(what) {}           \
    const char* kind() const noexcept override { return tag; }        \
  };

RMB_DEFINE_ERROR(ParameterError, "parameter")
RMB_DEFINE_ERROR(ConstructionError, "construction")
RMB_DEFINE_ERROR(ValidationError, "validation")
RMB_DEFINE_ERROR(KindError, "kind")
RMB_DEFINE_ERROR(SizeError, "size")
RMB_DEFINE_ERROR(DataError, "data")
RMB_DEFINE_ERROR(PreconditionError, "precondition")

#undef RMB_DEFINE_ERROR

/// Iterative solver gave up; the best estimate so far is attached.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double estimate, double rel_error)
      : Error(what), estimate_(estimate), rel_error_(rel_error) {}
  const char* kind() const noexcept override { return "non_convergence"; }
  double estimate() const noexcept { return estimate_; }
  double rel_error() const noexcept { return rel_error_; }

 private:
  double estimate_;
  double rel_error_;
};

}  // namespace rmb
