#include "wfmini/error.hpp"

namespace wfmini {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownKernel: return "UnknownKernel";
    case ErrorCode::MissingParameter: return "MissingParameter";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::CommunicatorRequired: return "CommunicatorRequired";
    case ErrorCode::DuplicateKernel: return "DuplicateKernel";
    case ErrorCode::ScratchUnavailable: return "ScratchUnavailable";
    case ErrorCode::ShortRead: return "ShortRead";
    case ErrorCode::ShortWrite: return "ShortWrite";
    case ErrorCode::CollectiveMismatch: return "CollectiveMismatch";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InsufficientSlots: return "InsufficientSlots";
    case ErrorCode::KernelFailure: return "KernelFailure";
    case ErrorCode::UnknownParameter: return "UnknownParameter";
    case ErrorCode::UnknownTaskReference: return "UnknownTaskReference";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::InsufficientPool: return "InsufficientPool";
    case ErrorCode::TaskFailed: return "TaskFailed";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::RunnerFailure: return "RunnerFailure";
    case ErrorCode::UnmappedKnob: return "UnmappedKnob";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::InvalidExemplar: return "InvalidExemplar";
  }
  return "Unknown";
}

}  // namespace wfmini
