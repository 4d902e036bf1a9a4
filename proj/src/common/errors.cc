#include "cbert/common/errors.h"

namespace cbert {

const char* category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::dimension: return "dimension";
    case ErrorCategory::index: return "index";
    case ErrorCategory::parameter: return "parameter";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::checkpoint: return "checkpoint";
    case ErrorCategory::training: return "training";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::io: return 3;
    case ErrorCategory::parse: return 4;
    case ErrorCategory::checkpoint: return 5;
    case ErrorCategory::training: return 6;
    case ErrorCategory::parameter: return 7;
    case ErrorCategory::dimension: return 8;
    case ErrorCategory::index: return 9;
  }
  return 1;
}

Error::Error(ErrorCategory category, const std::string& message)
    : std::runtime_error(std::string(category_name(category)) + " error: " + message),
      category_(category) {}

}  // namespace cbert
