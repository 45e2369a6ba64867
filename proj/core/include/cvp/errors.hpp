#pragma once

#include <stdexcept>
#include <string>

namespace cvp {

// Input-data failures. Messages carry the item id and 1-based event index
// (and the source line when the record came from a stream) so a bad log can
// be fixed by hand.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedRecord : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class NonContiguousTime : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class DanglingVote : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class BadDisplayOrder : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class MissingDisplayOrder : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class MissingMetadata : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class UnknownItem : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Numerical / degenerate-data failures.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFinite : public NumericError {
 public:
  using NumericError::NumericError;
};
class Unidentifiable : public NumericError {
 public:
  using NumericError::NumericError;
};
class TooShort : public NumericError {
 public:
  using NumericError::NumericError;
};
class ZeroVariance : public NumericError {
 public:
  using NumericError::NumericError;
};
class DegenerateX : public NumericError {
 public:
  using NumericError::NumericError;
};
class DuplicateX : public NumericError {
 public:
  using NumericError::NumericError;
};

// "item 'x', t=4" / "item 'x', t=4 (line 17)"
std::string record_context(const std::string& item_id, int t, long long line = -1);

}  // namespace cvp
