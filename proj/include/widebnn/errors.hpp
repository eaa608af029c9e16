#pragma once

#include <stdexcept>
#include <string>

namespace widebnn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

#define WIDEBNN_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                      \
      public:                                                        \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

WIDEBNN_DEFINE_ERROR(DimensionMismatch);
WIDEBNN_DEFINE_ERROR(NonFiniteEntry);
WIDEBNN_DEFINE_ERROR(NotSymmetric);
WIDEBNN_DEFINE_ERROR(NotPositiveDefinite);
WIDEBNN_DEFINE_ERROR(NotPSD);
WIDEBNN_DEFINE_ERROR(InvalidConfig);
WIDEBNN_DEFINE_ERROR(MalformedTarget);
WIDEBNN_DEFINE_ERROR(InsufficientSamples);
WIDEBNN_DEFINE_ERROR(ZeroReference);
WIDEBNN_DEFINE_ERROR(SingularP);
WIDEBNN_DEFINE_ERROR(BadRange);

#undef WIDEBNN_DEFINE_ERROR

}  // namespace widebnn
