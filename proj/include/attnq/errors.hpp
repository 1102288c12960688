#pragma once

#include <stdexcept>

namespace attnq {

// Base class for every error raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerics.
struct ShapeMismatch : Error { using Error::Error; };
struct NotPositiveDefinite : Error { using Error::Error; };
struct DimensionOverflow : Error { using Error::Error; };
struct InvalidArgument : Error { using Error::Error; };

// Calibration / model.
struct EmptyCalibration : Error { using Error::Error; };
struct HeadOutOfRange : Error { using Error::Error; };
struct InvalidDims : Error { using Error::Error; };

// Oracle.
struct SearchSpaceTooLarge : Error { using Error::Error; };

// Tensor files and manifests.
struct BadMagic : Error { using Error::Error; };
struct UnsupportedVersion : Error { using Error::Error; };
struct UnsupportedDtype : Error { using Error::Error; };
struct TruncatedPayload : Error { using Error::Error; };
struct DimMismatch : Error { using Error::Error; };
struct ManifestError : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };

} // namespace attnq
