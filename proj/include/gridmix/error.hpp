#pragma once

#include <stdexcept>
#include <string>

namespace gridmix {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GRIDMIX_DEFINE_ERROR(Name)            \
  class Name : public Error {                 \
   public:                                    \
    explicit Name(const std::string& what)    \
        : Error(std::string(#Name ": ") + what) {} \
  }

GRIDMIX_DEFINE_ERROR(ConfigInvalid);
GRIDMIX_DEFINE_ERROR(GenerationFailed);
GRIDMIX_DEFINE_ERROR(InvalidActionCount);
GRIDMIX_DEFINE_ERROR(EpisodeFinished);
GRIDMIX_DEFINE_ERROR(InactiveAgent);
GRIDMIX_DEFINE_ERROR(MapInvalid);
GRIDMIX_DEFINE_ERROR(ShapeMismatch);
GRIDMIX_DEFINE_ERROR(NonFiniteGradient);
GRIDMIX_DEFINE_ERROR(Underfilled);
GRIDMIX_DEFINE_ERROR(TopologyMismatch);
GRIDMIX_DEFINE_ERROR(MalformedLog);
GRIDMIX_DEFINE_ERROR(CheckpointInvalid);

#undef GRIDMIX_DEFINE_ERROR

}  // namespace gridmix
