#include "biogan/error.hpp"

namespace biogan {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kDecode: return "decode";
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kDataset: return "dataset";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kCheckpoint: return "checkpoint";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kUndefinedStatistic: return "undefined-statistic";
    case ErrorKind::kDescriptor: return "descriptor";
    case ErrorKind::kUsage: return "usage";
  }
  return "unknown";
}

}  // namespace biogan
