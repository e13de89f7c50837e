#pragma once

#include <stdexcept>
#include <string>

namespace evslt {

// Error categories map onto process exit codes (see tools/evslt_main.cpp):
// ConfigError -> 2, DataError -> 3, NumericError -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

#define EVSLT_DEFINE_ERROR(Name, Base)                                      \
    struct Name : Base {                                                    \
        explicit Name(const std::string& m) : Base(#Name ": " + m) {}       \
    }

// events
EVSLT_DEFINE_ERROR(MalformedFile, DataError);
EVSLT_DEFINE_ERROR(OutOfBounds, DataError);
EVSLT_DEFINE_ERROR(NonMonotonicTime, DataError);
EVSLT_DEFINE_ERROR(IoFailure, DataError);
EVSLT_DEFINE_ERROR(EmptyStream, DataError);

// numerics
EVSLT_DEFINE_ERROR(NonScalarLoss, NumericError);
EVSLT_DEFINE_ERROR(ShapeMismatch, NumericError);
EVSLT_DEFINE_ERROR(NonFiniteLoss, NumericError);
EVSLT_DEFINE_ERROR(DegenerateBatch, NumericError);
EVSLT_DEFINE_ERROR(AllPadded, NumericError);

// model configuration vs data
EVSLT_DEFINE_ERROR(SpatialUnderflow, ConfigError);
EVSLT_DEFINE_ERROR(TemporalUnderflow, ConfigError);
EVSLT_DEFINE_ERROR(UnknownMode, ConfigError);

// datasets / evaluation
EVSLT_DEFINE_ERROR(MissingSplit, DataError);
EVSLT_DEFINE_ERROR(EmptyCorpus, DataError);

#undef EVSLT_DEFINE_ERROR

}  // namespace evslt
