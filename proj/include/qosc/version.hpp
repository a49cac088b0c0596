#pragma once

namespace qosc {

// Recorded in experiment manifests; bump when output format or numerics change.
inline constexpr const char* version_string = "qosc 1.0.0";

}  // namespace qosc
