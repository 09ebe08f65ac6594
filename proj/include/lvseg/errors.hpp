#ifndef LVSEG_ERRORS_HPP
#define LVSEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lvseg {

// Every failure carries a kind that maps onto the CLI exit codes:
// usage -> 1, data -> 2, numeric -> 3.
class Error : public std::runtime_error {
 public:
  enum class Kind { Usage = 1, Data = 2, Numeric = 3 };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

#define LVSEG_ERROR_TYPE(NAME, KIND)                     \
  struct NAME : Error {                                  \
    explicit NAME(const std::string& what)               \
        : Error(Error::Kind::KIND, #NAME ": " + what) {} \
  }

// volume ingestion
LVSEG_ERROR_TYPE(MalformedHeader, Data);
LVSEG_ERROR_TYPE(UnsupportedDataType, Data);
LVSEG_ERROR_TYPE(IoFailure, Data);
LVSEG_ERROR_TYPE(InvalidTarget, Usage);
LVSEG_ERROR_TYPE(ShapeMismatch, Data);

// phantom
LVSEG_ERROR_TYPE(InvalidSpec, Usage);

// features
LVSEG_ERROR_TYPE(OutOfRange, Usage);
LVSEG_ERROR_TYPE(ImageTooSmall, Data);

// classifier
LVSEG_ERROR_TYPE(EmptyClass, Data);
LVSEG_ERROR_TYPE(DimensionMismatch, Data);
LVSEG_ERROR_TYPE(TooFewSamples, Data);
LVSEG_ERROR_TYPE(LengthMismatch, Data);

// mask generation
LVSEG_ERROR_TYPE(ZeroIntensity, Data);
LVSEG_ERROR_TYPE(EmptyMask, Data);

// level-set solver
LVSEG_ERROR_TYPE(NonFiniteField, Numeric);

// pipeline
LVSEG_ERROR_TYPE(EmptyStudy, Data);
LVSEG_ERROR_TYPE(EmptyGrid, Usage);
LVSEG_ERROR_TYPE(UsageError, Usage);

#undef LVSEG_ERROR_TYPE

}  // namespace lvseg

#endif
