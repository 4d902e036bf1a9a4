#pragma once

#include <stdexcept>
#include <string>

namespace cbert {

// Broad failure classes. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  dimension,
  index,
  parameter,
  parse,
  checkpoint,
  training,
  io,
  config,
};

const char* category_name(ErrorCategory category);
int exit_code_for(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message);
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

#define CBERT_DEFINE_ERROR(Name, Category)                  \
  class Name : public Error {                               \
   public:                                                  \
    explicit Name(const std::string& message)               \
        : Error(ErrorCategory::Category, message) {}        \
  };

CBERT_DEFINE_ERROR(DimensionError, dimension)
CBERT_DEFINE_ERROR(IndexError, index)
CBERT_DEFINE_ERROR(ParameterError, parameter)
CBERT_DEFINE_ERROR(ParseError, parse)
CBERT_DEFINE_ERROR(CheckpointError, checkpoint)
CBERT_DEFINE_ERROR(TrainingError, training)
CBERT_DEFINE_ERROR(IoError, io)
CBERT_DEFINE_ERROR(ConfigError, config)

#undef CBERT_DEFINE_ERROR

}  // namespace cbert
