#include "ecoecho/error.hpp"

#include <array>

namespace ecoecho {

namespace {
constexpr std::array<std::string_view, 20> kNames{
    "schema_error",     "validation_error",   "provider_timeout", "provider_error",  "wrong_stage",
    "empty_input",      "unknown_intent",     "illegal_transition", "out_of_range",  "wrong_round",
    "sample_too_small", "sample_too_large",   "zero_variance",    "degenerate_variance", "length_mismatch",
    "too_few_non_zero", "sequence_conflict",  "io_error",         "not_found",       "bad_input",
};
} // namespace

std::string_view to_string(ErrorCode code) noexcept { return kNames[static_cast<int>(code)]; }

} // namespace ecoecho
