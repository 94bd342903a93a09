#pragma once

#include <stdexcept>
#include <string>

namespace odml {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands or against a declared layout.
struct DimensionError : Error {
  using Error::Error;
};

// NaN/Inf where a finite value is required, or a degenerate row fed to
// a normalization.
struct NumericError : Error {
  using Error::Error;
};

// Backward pass requested without a matching forward pass on the tape.
struct TapeError : Error {
  using Error::Error;
};

// Malformed input file (segmap, JSONL, manifest, checkpoint).
struct ParseError : Error {
  using Error::Error;
};

// Bad configuration value or unknown name (split, variant, label, version).
struct ValidationError : Error {
  using Error::Error;
};

// Dataset cannot support the requested protocol (missing classes, too few
// records per class).
struct DataError : Error {
  using Error::Error;
};

}  // namespace odml
