#pragma once

#include <stdexcept>
#include <string>

namespace fractal {

// Base class for every error the library raises on a violated contract.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define FRACTAL_DEFINE_ERROR(Name)                                  \
    struct Name : Error {                                           \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

FRACTAL_DEFINE_ERROR(SingularMatrix);
FRACTAL_DEFINE_ERROR(IndexOutOfRange);
FRACTAL_DEFINE_ERROR(UnknownName);
FRACTAL_DEFINE_ERROR(BlowupLimit);
FRACTAL_DEFINE_ERROR(AmbiguousBoundary);
FRACTAL_DEFINE_ERROR(MarginTooLarge);
FRACTAL_DEFINE_ERROR(RejectionBudgetExceeded);
FRACTAL_DEFINE_ERROR(ParseError);
FRACTAL_DEFINE_ERROR(UnknownPreset);
FRACTAL_DEFINE_ERROR(GainTooSmall);
FRACTAL_DEFINE_ERROR(DegenerateMargin);
FRACTAL_DEFINE_ERROR(ShapeMismatch);
FRACTAL_DEFINE_ERROR(PieceBudgetExceeded);
FRACTAL_DEFINE_ERROR(DimensionMismatch);
FRACTAL_DEFINE_ERROR(MarginSaturated);
FRACTAL_DEFINE_ERROR(ThresholdViolated);
FRACTAL_DEFINE_ERROR(BudgetTooLarge);
FRACTAL_DEFINE_ERROR(InvalidArgument);
FRACTAL_DEFINE_ERROR(ConfigError);
FRACTAL_DEFINE_ERROR(VerificationFailure);

#undef FRACTAL_DEFINE_ERROR

} // namespace fractal
