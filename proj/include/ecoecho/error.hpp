#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecoecho {

enum class ErrorCode {
    // scenario-model
    SchemaError,
    ValidationError,
    // llm-gateway
    ProviderTimeout,
    ProviderError,
    // dialogue-engine / game-state
    WrongStage,
    EmptyInput,
    UnknownIntent,
    IllegalTransition,
    // assessment
    OutOfRange,
    WrongRound,
    SampleTooSmall,
    SampleTooLarge,
    ZeroVariance,
    DegenerateVariance,
    LengthMismatch,
    TooFewNonZero,
    // session-store
    SequenceConflict,
    IoError,
    NotFound,
    // playthrough scripts, CLI input
    BadInput,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the engine carries one of the closed ErrorCode values,
/// so callers (HTTP layer, CLI) can map it without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace ecoecho
