#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace modal_attrib {

// Base of every error raised by the library. kind() is the stable name used
// in the CLI's structured error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MODAL_ATTRIB_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(#Name, message) {}  \
  };

MODAL_ATTRIB_DEFINE_ERROR(SchemaError)
MODAL_ATTRIB_DEFINE_ERROR(ParseError)
MODAL_ATTRIB_DEFINE_ERROR(DuplicateIdError)
MODAL_ATTRIB_DEFINE_ERROR(ConfigError)
MODAL_ATTRIB_DEFINE_ERROR(AnnotationError)
MODAL_ATTRIB_DEFINE_ERROR(JoinError)
MODAL_ATTRIB_DEFINE_ERROR(StaleArtifactError)
MODAL_ATTRIB_DEFINE_ERROR(IoError)

#undef MODAL_ATTRIB_DEFINE_ERROR

}  // namespace modal_attrib
