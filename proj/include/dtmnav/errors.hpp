#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dtmnav {

enum class ErrorCode {
    InvalidDirection,
    GrazingRay,
    OutOfBounds,
    NoDataCell,
    NoIntersection,
    StartsBelowTerrain,
    MalformedHeader,
    RowLengthMismatch,
    OutOfFieldOfView,
    UnknownCameraIndex,
    NotVisible,
    AllFeaturesRejected,
    RankDeficient,
    TooFewFeatures,
    DivergenceDetected,
    TerrainCollision,
    TimestampMismatch,
    InsufficientVisibleFeatures,
    InvalidArgument,
    ParseError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto a stable exit status.
class NavError : public std::runtime_error {
public:
    NavError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dtmnav
