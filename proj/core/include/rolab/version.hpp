#pragma once

namespace rolab {

inline constexpr const char* kToolVersion = "0.1.0";

// Bumped whenever the corresponding on-disk layout changes.
inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kRunDbFormatVersion = 1;

}  // namespace rolab
