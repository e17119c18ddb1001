#pragma once

#include <stdexcept>
#include <string>

namespace biogan {

enum class ErrorKind {
  kIo,
  kDecode,
  kArgument,
  kDataset,
  kShape,
  kCheckpoint,
  kParse,
  kValidation,
  kNumeric,
  kUndefinedStatistic,
  kDescriptor,
  kUsage,
};

const char* to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind drives
/// the CLI exit-code taxonomy.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define BIOGAN_DEFINE_ERROR(Name, Kind)                                 \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  };

BIOGAN_DEFINE_ERROR(IoError, ErrorKind::kIo)
BIOGAN_DEFINE_ERROR(DecodeError, ErrorKind::kDecode)
BIOGAN_DEFINE_ERROR(ArgumentError, ErrorKind::kArgument)
BIOGAN_DEFINE_ERROR(DatasetError, ErrorKind::kDataset)
BIOGAN_DEFINE_ERROR(ShapeError, ErrorKind::kShape)
BIOGAN_DEFINE_ERROR(CheckpointError, ErrorKind::kCheckpoint)
BIOGAN_DEFINE_ERROR(ParseError, ErrorKind::kParse)
BIOGAN_DEFINE_ERROR(ValidationError, ErrorKind::kValidation)
BIOGAN_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
BIOGAN_DEFINE_ERROR(UndefinedStatisticError, ErrorKind::kUndefinedStatistic)
BIOGAN_DEFINE_ERROR(DescriptorError, ErrorKind::kDescriptor)
BIOGAN_DEFINE_ERROR(UsageError, ErrorKind::kUsage)

#undef BIOGAN_DEFINE_ERROR

}  // namespace biogan
