#pragma once

#include <stdexcept>
#include <string>

namespace sketchsearch {

// Every failure the engine reports derives from Error so callers that do not
// care about the specific kind can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SKETCHSEARCH_ERROR(Name)             \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  }

SKETCHSEARCH_ERROR(DegenerateInput);
SKETCHSEARCH_ERROR(DegeneratePolygon);
SKETCHSEARCH_ERROR(ZeroLikelihood);
SKETCHSEARCH_ERROR(UnknownSketch);
SKETCHSEARCH_ERROR(UnknownReference);
SKETCHSEARCH_ERROR(DuplicateLabel);
SKETCHSEARCH_ERROR(IllegalMove);
SKETCHSEARCH_ERROR(EmptyBelief);
SKETCHSEARCH_ERROR(ConfigError);
SKETCHSEARCH_ERROR(ProtocolError);

#undef SKETCHSEARCH_ERROR

}  // namespace sketchsearch
