#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrfusion {

/// Base of every error raised by the library. `kind()` is a stable,
/// machine-parsable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
public:
    Error(std::string_view kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define MRFUSION_DEFINE_ERROR(Name, tag)                                      \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what) : Error(tag, what) {}          \
    }

MRFUSION_DEFINE_ERROR(DimensionError, "dimension");
MRFUSION_DEFINE_ERROR(NumericError, "numeric");
MRFUSION_DEFINE_ERROR(ConfigError, "config");
MRFUSION_DEFINE_ERROR(InputError, "input");
MRFUSION_DEFINE_ERROR(StateError, "state");
MRFUSION_DEFINE_ERROR(FormatError, "format");
MRFUSION_DEFINE_ERROR(AlignmentError, "alignment");
MRFUSION_DEFINE_ERROR(BoundsError, "bounds");
MRFUSION_DEFINE_ERROR(LabelError, "label");
MRFUSION_DEFINE_ERROR(SplitError, "split");
MRFUSION_DEFINE_ERROR(TrainingError, "training");
MRFUSION_DEFINE_ERROR(IoError, "io");

#undef MRFUSION_DEFINE_ERROR

}  // namespace mrfusion
