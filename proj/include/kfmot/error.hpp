#pragma once

#include <stdexcept>
#include <string>

namespace kfmot {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define KFMOT_DEFINE_ERROR(Name)                 \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

KFMOT_DEFINE_ERROR(InvalidArgument);
KFMOT_DEFINE_ERROR(SingularInnovation);
KFMOT_DEFINE_ERROR(NonMonotonicFrame);
KFMOT_DEFINE_ERROR(InsufficientData);
KFMOT_DEFINE_ERROR(DegenerateVariance);
KFMOT_DEFINE_ERROR(TargetAbsent);
KFMOT_DEFINE_ERROR(NoFeasibleLambda);
KFMOT_DEFINE_ERROR(EmptyGroundTruth);
KFMOT_DEFINE_ERROR(NoOverlap);
KFMOT_DEFINE_ERROR(NoTarget);
KFMOT_DEFINE_ERROR(UnitsMismatch);
KFMOT_DEFINE_ERROR(NonContiguousFrames);

#undef KFMOT_DEFINE_ERROR

/// Parse failure on a label file; carries the 1-based line number.
class MalformedRow : public Error {
public:
    MalformedRow(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace kfmot
