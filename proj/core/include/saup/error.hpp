#ifndef SAUP_ERROR_HPP
#define SAUP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace saup {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape disagreement between tensors / arrays.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid normalization spec (nonpositive std, bad channel count, ...).
struct SpecError : Error {
  using Error::Error;
};

// Degenerate constraint-region geometry (frame too wide, patches overlap, ...).
struct GeometryError : Error {
  using Error::Error;
};

// Unknown word or out-of-range token id.
struct VocabularyError : Error {
  using Error::Error;
};

// Non-finite loss or gradient.
struct NumericalError : Error {
  using Error::Error;
};

// Unusable input data (empty dataset, insufficient pool, ...).
struct InputError : Error {
  using Error::Error;
};

// Bad run configuration or artifact/model mismatch.
struct ConfigError : Error {
  using Error::Error;
};

// Manifest schema violation; message carries the offending field path.
struct SchemaError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace saup

#endif  // SAUP_ERROR_HPP
