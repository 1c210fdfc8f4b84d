#include "cwms/error.hpp"

namespace cwms {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DanglingContainerRef: return "DanglingContainerRef";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::UnknownScheme: return "UnknownScheme";
    case ErrorCode::EmptyLocator: return "EmptyLocator";
    case ErrorCode::MalformedMount: return "MalformedMount";
    case ErrorCode::UnknownOption: return "UnknownOption";
    case ErrorCode::InvalidContainer: return "InvalidContainer";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::DanglingEdge: return "DanglingEdge";
    case ErrorCode::MultipleProducers: return "MultipleProducers";
    case ErrorCode::OrphanInput: return "OrphanInput";
    case ErrorCode::InvalidTask: return "InvalidTask";
    case ErrorCode::UnresolvableTransformation: return "UnresolvableTransformation";
    case ErrorCode::RuntimeUnavailable: return "RuntimeUnavailable";
    case ErrorCode::InconsistentPlacement: return "InconsistentPlacement";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::StepFailed: return "StepFailed";
    case ErrorCode::MissingRuntime: return "MissingRuntime";
    case ErrorCode::SchemeNotExportable: return "SchemeNotExportable";
    case ErrorCode::RegistryMiss: return "RegistryMiss";
    case ErrorCode::SourceMissing: return "SourceMissing";
    case ErrorCode::DestinationUnwritable: return "DestinationUnwritable";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::UnmappedSite: return "UnmappedSite";
    case ErrorCode::MissingSize: return "MissingSize";
    case ErrorCode::InvalidTopology: return "InvalidTopology";
  }
  return "Unknown";
}

}  // namespace cwms
