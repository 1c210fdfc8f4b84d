#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cwms {

enum class ErrorCode {
  // catalog
  SyntaxError,
  DanglingContainerRef,
  DuplicateName,
  UnknownScheme,
  EmptyLocator,
  MalformedMount,
  UnknownOption,
  InvalidContainer,
  NotFound,
  // workflow
  CycleDetected,
  DanglingEdge,
  MultipleProducers,
  OrphanInput,
  InvalidTask,
  // planner / launcher
  UnresolvableTransformation,
  RuntimeUnavailable,
  InconsistentPlacement,
  InvalidConfig,
  StepFailed,
  MissingRuntime,
  // transfer
  SchemeNotExportable,
  RegistryMiss,
  SourceMissing,
  DestinationUnwritable,
  ChecksumMismatch,
  InvalidRequest,
  // simulator
  UnmappedSite,
  MissingSize,
  InvalidTopology,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures surface as cwms::Error carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cwms
