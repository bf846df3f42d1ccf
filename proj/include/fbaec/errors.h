#ifndef FBAEC_ERRORS_H_
#define FBAEC_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fbaec {

// Base for every error raised by the library. Callers that only need a
// diagnostic can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched lengths, grids or layer shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Values outside their documented range (sample rate, dB ranges, delays).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Malformed files: WAV headers, BWEW weight files, config text.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace fbaec

#endif  // FBAEC_ERRORS_H_
