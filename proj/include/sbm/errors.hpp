#pragma once

#include <stdexcept>
#include <string>

namespace sbm {

// Base class for everything thrown by the runtime so harnesses can catch
// one type at the top of an episode loop.
class SbmError : public std::runtime_error {
 public:
  explicit SbmError(const std::string& what) : std::runtime_error(what) {}
};

// Model assembly problems: duplicate scenario ids, conflicting payload-kind
// declarations for an event label, malformed builder arguments.
class RegistrationError : public SbmError {
 public:
  using SbmError::SbmError;
};

// A statement or event violates a payload contract: non-finite number,
// wrong payload kind for a label, negative request weight.
class PayloadError : public SbmError {
 public:
  using SbmError::SbmError;
};

// A statement declared by a scenario is self-contradictory or breaks a
// model-level convention (e.g. blocking an input label).
class StatementError : public SbmError {
 public:
  using SbmError::SbmError;
};

// A modifier returned an event matched by the step's blocked set.  This is
// a contract violation and aborts the run.
class ModifierContractError : public SbmError {
 public:
  using SbmError::SbmError;
};

// Exhaustive enumeration hit its node budget before reaching the requested
// depth.
class StateSpaceCapError : public SbmError {
 public:
  using SbmError::SbmError;
};

// Malformed external input: network weight files, world files, run configs.
class FormatError : public SbmError {
 public:
  using SbmError::SbmError;
};

}  // namespace sbm
